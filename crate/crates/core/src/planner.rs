//! Task plans, control recipes, and the compiler between them.
//!
//! A task plan names the skills in order with their target parts and the
//! user-selected parameters. Compilation turns it into a control recipe whose
//! steps carry fully resolved approach/action/departure poses (or scan
//! paths), plus one localization recipe per localized part.
//!
//! Grip poses come from four user-selected vertices. Their order matters:
//! x runs from the first to the second vertex and z is the normal of the
//! plane through the first three (right-hand rule).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{from_json_str, Error, Result};
use crate::features::{build_localization_recipe, LocalizationRecipe, DEFAULT_SPACING};
use crate::geom::{FrameTag, Point3, Pose, RigidTransform, Vector3};
use crate::partmodel::{AssemblyModel, PartId};

pub const RECIPE_VERSION: &str = "1";
pub const DEFAULT_OFFSET_DISTANCE: f64 = 0.05;
pub const DEFAULT_SPEED: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillKind {
    Pick,
    Place,
    LocalizeObject,
    Scan,
    PickLocalized,
    PlaceLocalized,
    ScanLocalized,
}

impl SkillKind {
    pub const ALL: [SkillKind; 7] = [
        SkillKind::Pick,
        SkillKind::Place,
        SkillKind::LocalizeObject,
        SkillKind::Scan,
        SkillKind::PickLocalized,
        SkillKind::PlaceLocalized,
        SkillKind::ScanLocalized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SkillKind::Pick => "pick",
            SkillKind::Place => "place",
            SkillKind::LocalizeObject => "localize_object",
            SkillKind::Scan => "scan",
            SkillKind::PickLocalized => "pick_localized",
            SkillKind::PlaceLocalized => "place_localized",
            SkillKind::ScanLocalized => "scan_localized",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            SkillKind::Place | SkillKind::PlaceLocalized => 2,
            _ => 1,
        }
    }

    pub fn is_composite(self) -> bool {
        matches!(
            self,
            SkillKind::PickLocalized | SkillKind::PlaceLocalized | SkillKind::ScanLocalized
        )
    }

    /// The atomic skill a composite wraps (atomic kinds map to themselves).
    pub fn base(self) -> SkillKind {
        match self {
            SkillKind::PickLocalized => SkillKind::Pick,
            SkillKind::PlaceLocalized => SkillKind::Place,
            SkillKind::ScanLocalized => SkillKind::Scan,
            other => other,
        }
    }

    /// Constituent atomic skills, in execution order.
    pub fn constituents(self) -> Vec<SkillKind> {
        if self.is_composite() {
            vec![SkillKind::LocalizeObject, self.base()]
        } else {
            vec![self]
        }
    }

    /// Index into the step targets of the part that gets localized. For
    /// place it is the part being placed onto.
    pub fn localized_target(self) -> Option<usize> {
        match self {
            SkillKind::LocalizeObject | SkillKind::PickLocalized | SkillKind::ScanLocalized => Some(0),
            SkillKind::PlaceLocalized => Some(1),
            _ => None,
        }
    }

    /// Index into the step targets of the part whose geometry defines the poses.
    pub fn pose_target(self) -> Option<usize> {
        match self.base() {
            SkillKind::Pick | SkillKind::Scan => Some(0),
            SkillKind::Place => Some(1),
            _ => None,
        }
    }

    pub fn uses_named_poses(self) -> bool {
        matches!(self.base(), SkillKind::Pick | SkillKind::Place)
    }

    pub fn uses_path(self) -> bool {
        self.base() == SkillKind::Scan
    }
}

impl fmt::Display for SkillKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SkillKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SkillKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidPlan(format!("unknown skill {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "+x")]
    PosX,
    #[serde(rename = "-x")]
    NegX,
    #[serde(rename = "+y")]
    PosY,
    #[serde(rename = "-y")]
    NegY,
    #[serde(rename = "+z")]
    PosZ,
    #[serde(rename = "-z")]
    NegZ,
}

impl Axis {
    pub fn unit(self) -> Vector3 {
        match self {
            Axis::PosX => Vector3::x(),
            Axis::NegX => -Vector3::x(),
            Axis::PosY => Vector3::y(),
            Axis::NegY => -Vector3::y(),
            Axis::PosZ => Vector3::z(),
            Axis::NegZ => -Vector3::z(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisOffset {
    pub axis: Axis,
    pub distance: f64,
}

impl Default for AxisOffset {
    fn default() -> Self {
        AxisOffset {
            axis: Axis::PosY,
            distance: DEFAULT_OFFSET_DISTANCE,
        }
    }
}

/// User-selected parameters of one plan step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepParams {
    /// Four vertex indices of the pose part, in orientation-defining order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<[usize; 4]>,
    /// Local adjustment applied on top of the vertex grip pose.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<RigidTransform>,
    /// Wires used as localization features.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wires: Vec<String>,
    /// Scan path, part frame.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<RigidTransform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach: Option<AxisOffset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub departure: Option<AxisOffset>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanStep {
    pub order: u32,
    pub skill: SkillKind,
    pub targets: Vec<PartId>,
    #[serde(default, skip_serializing_if = "is_default_params")]
    pub params: StepParams,
}

fn is_default_params(p: &StepParams) -> bool {
    *p == StepParams::default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskPlan {
    pub name: String,
    pub steps: Vec<PlanStep>,
}

impl TaskPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: TaskPlan = from_json_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serializes");
        s.push('\n');
        s
    }

    /// Orders unique and contiguous from 1; target counts match skill arity.
    pub fn validate(&self) -> Result<()> {
        let mut orders: Vec<u32> = self.steps.iter().map(|s| s.order).collect();
        orders.sort_unstable();
        for (i, o) in orders.iter().enumerate() {
            if i > 0 && orders[i - 1] == *o {
                return Err(Error::DuplicateOrder(*o));
            }
            if *o as usize != i + 1 {
                return Err(Error::InvalidPlan(format!("step orders must be contiguous from 1, found {o}")));
            }
        }
        for s in &self.steps {
            if s.targets.len() != s.skill.arity() {
                return Err(Error::ArityMismatch {
                    order: s.order,
                    skill: s.skill.name().to_string(),
                    expected: s.skill.arity(),
                    got: s.targets.len(),
                });
            }
        }
        Ok(())
    }

    /// Same plan with parameters stripped, i.e. what an annotation preserves.
    pub fn skeleton(&self) -> Vec<(u32, SkillKind, Vec<PartId>)> {
        let mut v: Vec<_> = self
            .steps
            .iter()
            .map(|s| (s.order, s.skill, s.targets.clone()))
            .collect();
        v.sort_by_key(|s| s.0);
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPoses {
    pub approach: Pose,
    pub action: Pose,
    pub departure: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkillStep {
    pub order: u32,
    pub skill: SkillKind,
    pub targets: Vec<PartId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poses: Option<NamedPoses>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<Pose>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localization_recipe: Option<String>,
    pub speed: f64,
}

impl SkillStep {
    pub fn localized_part(&self) -> Option<&PartId> {
        self.skill.localized_target().and_then(|i| self.targets.get(i))
    }

    pub fn all_poses(&self) -> Vec<&Pose> {
        let mut out = Vec::new();
        if let Some(p) = &self.poses {
            out.extend([&p.approach, &p.action, &p.departure]);
        }
        if let Some(path) = &self.path {
            out.extend(path.iter());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlRecipe {
    pub name: String,
    pub version: String,
    pub steps: Vec<SkillStep>,
}

impl ControlRecipe {
    pub fn new(name: impl Into<String>, steps: Vec<SkillStep>) -> Self {
        ControlRecipe {
            name: name.into(),
            version: RECIPE_VERSION.to_string(),
            steps,
        }
    }

    /// Localization recipe references used by the steps, deduplicated.
    pub fn localization_refs(&self) -> Vec<&str> {
        let mut refs: Vec<&str> = self
            .steps
            .iter()
            .filter_map(|s| s.localization_recipe.as_deref())
            .collect();
        refs.sort_unstable();
        refs.dedup();
        refs
    }
}

pub fn serialize_recipe(r: &ControlRecipe) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("recipe serializes");
    s.push('\n');
    s
}

pub fn parse_recipe(text: &str) -> Result<ControlRecipe> {
    #[derive(Deserialize)]
    struct Probe {
        version: Option<serde_json::Value>,
    }
    // version is checked before the full schema so newer documents are
    // reported as a version problem rather than a field error
    if let Ok(Probe { version: Some(v) }) = serde_json::from_str::<Probe>(text) {
        if v.as_str() != Some(RECIPE_VERSION) {
            return Err(Error::VersionMismatch {
                found: v.to_string(),
                expected: RECIPE_VERSION.to_string(),
            });
        }
    }
    from_json_str(text)
}

/// Check every recipe and step invariant; an empty list means valid.
pub fn validate_recipe(r: &ControlRecipe) -> Vec<String> {
    let mut v = Vec::new();
    if r.version != RECIPE_VERSION {
        v.push(format!("version {:?} is not {RECIPE_VERSION:?}", r.version));
    }
    for (i, s) in r.steps.iter().enumerate() {
        let at = format!("step {} ({})", s.order, s.skill);
        if i == 0 && s.order != 1 {
            v.push(format!("{at}: first order must be 1"));
        } else if i > 0 {
            let prev = r.steps[i - 1].order;
            if s.order == prev {
                v.push(format!("{at}: duplicate order"));
            } else if s.order != prev + 1 {
                v.push(format!("{at}: order does not follow {prev}"));
            }
        }
        if s.targets.len() != s.skill.arity() {
            v.push(format!("{at}: expects {} target(s), has {}", s.skill.arity(), s.targets.len()));
        }
        if !(s.speed > 0.0 && s.speed.is_finite()) {
            v.push(format!("{at}: speed must be positive"));
        }
        if s.skill.uses_named_poses() {
            if s.poses.is_none() {
                v.push(format!("{at}: missing approach/action/departure poses"));
            }
            if s.path.is_some() {
                v.push(format!("{at}: unexpected path"));
            }
        } else if s.skill.uses_path() {
            match &s.path {
                Some(p) if p.len() >= 2 => {}
                _ => v.push(format!("{at}: scan path needs at least 2 poses")),
            }
            if s.poses.is_some() {
                v.push(format!("{at}: unexpected named poses"));
            }
        } else if s.poses.is_some() || s.path.is_some() {
            v.push(format!("{at}: localize step carries poses"));
        }
        let localized = s.localized_part();
        if localized.is_some() && s.localization_recipe.is_none() {
            v.push(format!("{at}: missing localization recipe reference"));
        }
        for pose in s.all_poses() {
            if let FrameTag::Object(part) = &pose.frame {
                if localized != Some(part) {
                    v.push(format!("{at}: pose in frame object:{part} has no localization in this step"));
                    break;
                }
            } else if s.skill.is_composite() {
                v.push(format!("{at}: composite step pose must be in the localized object frame"));
                break;
            }
        }
    }
    v
}

/// Grip pose centred on four vertices, oriented by the first three.
pub fn grip_pose_from_vertices(v1: Point3, v2: Point3, v3: Point3, v4: Point3) -> Result<Pose> {
    let e1 = v2 - v1;
    let e2 = v3 - v1;
    let n = e1.cross(&e2);
    let scale = e1.norm() * e2.norm();
    if e1.norm() <= 1e-12 || scale <= 1e-24 || n.norm() <= 1e-12 * scale {
        return Err(Error::DegenerateVertices(
            "first three vertices are coincident or collinear".into(),
        ));
    }
    let x = e1.normalize();
    let z = n.normalize();
    let y = z.cross(&x);
    let x = y.cross(&z);
    let position = (v1.coords + v2.coords + v3.coords + v4.coords) / 4.0;
    let rot = nalgebra::Matrix3::from_columns(&[x, y, z]);
    Ok(Pose::world(RigidTransform::from_matrix(&rot, position)))
}

/// Translate a pose along one of its own axes.
pub fn offset_pose(base: &Pose, axis: Axis, distance: f64) -> Pose {
    if distance == 0.0 {
        return base.clone();
    }
    let t = base.transform.translation() + base.transform.transform_vector(&axis.unit()) * distance;
    Pose {
        transform: base.transform.with_translation(t),
        frame: base.frame.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompilationRules {
    pub approach: AxisOffset,
    pub departure: AxisOffset,
    pub speed: f64,
    pub sampling_spacing: f64,
    /// World ← assembly frame, used for non-localized steps.
    pub world_from_assembly: RigidTransform,
}

impl Default for CompilationRules {
    fn default() -> Self {
        CompilationRules {
            approach: AxisOffset::default(),
            departure: AxisOffset::default(),
            speed: DEFAULT_SPEED,
            sampling_spacing: DEFAULT_SPACING,
            world_from_assembly: RigidTransform::identity(),
        }
    }
}

/// File name used to reference a part's localization recipe.
pub fn localization_ref(part: &PartId) -> String {
    format!("{}.loc.json", part.file_stem())
}

pub fn compile_task(
    model: &AssemblyModel,
    plan: &TaskPlan,
    rules: &CompilationRules,
) -> Result<(ControlRecipe, Vec<LocalizationRecipe>)> {
    plan.validate()?;
    let mut plan_steps: Vec<&PlanStep> = plan.steps.iter().collect();
    plan_steps.sort_by_key(|s| s.order);

    let mut loc_recipes: Vec<LocalizationRecipe> = Vec::new();
    let mut loc_wires: BTreeMap<PartId, Vec<String>> = BTreeMap::new();
    let mut steps = Vec::with_capacity(plan_steps.len());

    for ps in plan_steps {
        let at = |m: String| Error::InvalidPlan(format!("step {}: {m}", ps.order));
        for t in &ps.targets {
            model.resolve(t)?;
        }
        let speed = ps.params.speed.unwrap_or(rules.speed);
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(at(format!("speed {speed} must be positive")));
        }

        let mut localization_recipe = None;
        if let Some(idx) = ps.skill.localized_target() {
            let part_id = &ps.targets[idx];
            match loc_wires.get(part_id) {
                Some(wires) if *wires != ps.params.wires && !ps.params.wires.is_empty() => {
                    return Err(at(format!("part {part_id} localized with different wire sets")));
                }
                Some(_) => {}
                None => {
                    let (_, geometry) = model.resolve(part_id)?;
                    let recipe = build_localization_recipe(
                        geometry,
                        part_id,
                        &ps.params.wires,
                        rules.sampling_spacing,
                    )?;
                    loc_wires.insert(part_id.clone(), ps.params.wires.clone());
                    loc_recipes.push(recipe);
                }
            }
            localization_recipe = Some(localization_ref(part_id));
        }

        // frame in which the user geometry of this step is re-expressed
        let (frame, base) = match ps.skill.pose_target() {
            Some(idx) => {
                let part_id = &ps.targets[idx];
                if ps.skill.is_composite() {
                    (FrameTag::Object(part_id.clone()), RigidTransform::identity())
                } else {
                    let (inst, _) = model.resolve(part_id)?;
                    (FrameTag::World, rules.world_from_assembly.compose(&inst.placement))
                }
            }
            None => (FrameTag::World, RigidTransform::identity()),
        };

        let mut poses = None;
        let mut path = None;
        if ps.skill.uses_named_poses() {
            let part_id = &ps.targets[ps.skill.pose_target().expect("pose target")];
            let (_, geometry) = model.resolve(part_id)?;
            let idx = ps
                .params
                .vertices
                .ok_or_else(|| at("pick/place step needs four selected vertices".into()))?;
            let mut v = [Point3::origin(); 4];
            for (slot, i) in v.iter_mut().zip(idx) {
                *slot = *geometry
                    .vertices
                    .get(i)
                    .ok_or_else(|| at(format!("vertex index {i} out of range for part {}", geometry.name)))?;
            }
            let grip = grip_pose_from_vertices(v[0], v[1], v[2], v[3])?.transform;
            let local = match &ps.params.offset {
                Some(off) => grip.compose(off),
                None => grip,
            };
            let action = Pose {
                transform: base.compose(&local),
                frame: frame.clone(),
            };
            let approach = ps.params.approach.unwrap_or(rules.approach);
            let departure = ps.params.departure.unwrap_or(rules.departure);
            poses = Some(NamedPoses {
                approach: offset_pose(&action, approach.axis, approach.distance),
                departure: offset_pose(&action, departure.axis, departure.distance),
                action,
            });
        } else if ps.skill.uses_path() {
            if ps.params.path.len() < 2 {
                return Err(at("scan path needs at least 2 poses".into()));
            }
            path = Some(
                ps.params
                    .path
                    .iter()
                    .map(|p| Pose {
                        transform: base.compose(p),
                        frame: frame.clone(),
                    })
                    .collect(),
            );
        }

        steps.push(SkillStep {
            order: ps.order,
            skill: ps.skill,
            targets: ps.targets.clone(),
            poses,
            path,
            localization_recipe,
            speed,
        });
    }

    let recipe = ControlRecipe::new(plan.name.clone(), steps);
    let violations = validate_recipe(&recipe);
    if !violations.is_empty() {
        return Err(Error::InvalidRecipe(violations.join("; ")));
    }
    Ok((recipe, loc_recipes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partmodel::{Instance, PartGeometry, Wire};

    fn square() -> [Point3; 4] {
        [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ]
    }

    fn block() -> PartGeometry {
        // 0.1 m cube top face corners plus three marker loops on the top
        let h = 0.05;
        let mut vertices = vec![
            Point3::new(-h, -h, 0.0),
            Point3::new(h, -h, 0.0),
            Point3::new(h, h, 0.0),
            Point3::new(-h, h, 0.0),
        ];
        let mut edges = vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 0]];
        let mut wires = vec![Wire { name: "top".into(), edges: vec![0, 1, 2, 3], closed: true }];
        for (k, (cx, cy, r)) in [(-0.03, -0.03, 0.004), (0.03, -0.02, 0.006), (-0.01, 0.03, 0.008)].into_iter().enumerate() {
            let b = vertices.len();
            for (dx, dy) in [(-r, -r), (r, -r), (r, r), (-r, r)] {
                vertices.push(Point3::new(cx + dx, cy + dy, 0.0));
            }
            let e = edges.len();
            for i in 0..4 {
                edges.push(vec![b + i, b + (i + 1) % 4]);
            }
            wires.push(Wire { name: format!("m{k}"), edges: (e..e + 4).collect(), closed: true });
        }
        PartGeometry { name: "block".into(), vertices, edges, wires }
    }

    fn model() -> AssemblyModel {
        AssemblyModel {
            assembly_name: "demo".into(),
            parts: vec![block()],
            instances: vec![
                Instance {
                    instance_name: "b1".into(),
                    part_name: "block".into(),
                    placement: RigidTransform::from_translation(0.5, 0.0, 0.1),
                },
                Instance {
                    instance_name: "b2".into(),
                    part_name: "block".into(),
                    placement: RigidTransform::from_translation(0.5, 0.3, 0.1),
                },
            ],
            annotations: vec![],
        }
    }

    fn id(s: &str) -> PartId {
        s.parse().unwrap()
    }

    fn pick_step(order: u32, skill: SkillKind, target: &str) -> PlanStep {
        PlanStep {
            order,
            skill,
            targets: vec![id(target)],
            params: StepParams {
                vertices: Some([0, 1, 2, 3]),
                wires: vec!["m0".into(), "m1".into(), "m2".into()],
                ..Default::default()
            },
        }
    }

    #[test]
    fn grip_pose_square() {
        let [a, b, c, d] = square();
        let p = grip_pose_from_vertices(a, b, c, d).unwrap();
        assert_eq!(p.position(), Point3::new(0.5, 0.5, 0.0));
        let t = &p.transform;
        assert!((t.axis(0) - Vector3::x()).norm() < 1e-15);
        assert!((t.axis(1) - Vector3::y()).norm() < 1e-15);
        assert!((t.axis(2) - Vector3::z()).norm() < 1e-15);
        assert_eq!(p.frame, FrameTag::World);
    }

    #[test]
    fn grip_pose_degenerate() {
        let line: Vec<_> = (0..4).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(
            grip_pose_from_vertices(line[0], line[1], line[2], line[3]),
            Err(Error::DegenerateVertices(_))
        ));
        let o = Point3::origin();
        assert!(grip_pose_from_vertices(o, o, Point3::new(0.0, 1.0, 0.0), o).is_err());
    }

    #[test]
    fn offset_pose_cases() {
        let id_pose = Pose::world(RigidTransform::identity());
        let p = offset_pose(&id_pose, Axis::PosY, 0.1);
        assert_eq!(p.position(), Point3::new(0.0, 0.1, 0.0));
        let any = Pose::world(RigidTransform::from_axis_angle(Vector3::new(1.0, 2.0, 3.0), 0.7));
        assert_eq!(offset_pose(&any, Axis::NegZ, 0.0), any);
        let rz = Pose::world(RigidTransform::from_axis_angle(Vector3::z(), std::f64::consts::FRAC_PI_2));
        let p = offset_pose(&rz, Axis::PosY, 0.1);
        assert!((p.position() - Point3::new(-0.1, 0.0, 0.0)).norm() < 1e-15);
        assert_eq!(p.transform.rotation(), rz.transform.rotation());
    }

    #[test]
    fn compile_single_pick() {
        let plan = TaskPlan { name: "t".into(), steps: vec![pick_step(1, SkillKind::Pick, "block/b1|demo")] };
        let (recipe, locs) = compile_task(&model(), &plan, &CompilationRules::default()).unwrap();
        assert!(locs.is_empty());
        assert_eq!(recipe.steps.len(), 1);
        let poses = recipe.steps[0].poses.as_ref().unwrap();
        assert!((poses.action.position() - Point3::new(0.5, 0.0, 0.1)).norm() < 1e-15);
        let d = poses.approach.position() - poses.action.position();
        assert!((d.norm() - 0.05).abs() < 1e-12);
        assert!((d.normalize() - poses.action.transform.axis(1)).norm() < 1e-12);
        assert_eq!(poses.approach.transform.rotation(), poses.action.transform.rotation());
        assert!(validate_recipe(&recipe).is_empty());
    }

    #[test]
    fn compile_pick_localized() {
        let plan = TaskPlan { name: "t".into(), steps: vec![pick_step(1, SkillKind::PickLocalized, "block/b1|demo")] };
        let (recipe, locs) = compile_task(&model(), &plan, &CompilationRules::default()).unwrap();
        assert_eq!(locs.len(), 1);
        let step = &recipe.steps[0];
        assert_eq!(step.localization_recipe.as_deref(), Some("block__b1__demo.loc.json"));
        for p in step.all_poses() {
            assert_eq!(p.frame, FrameTag::Object(id("block/b1|demo")));
        }
        // part frame pose: the grip sits at the top-face centre
        assert!(step.poses.as_ref().unwrap().action.position().coords.norm() < 1e-15);
    }

    #[test]
    fn compile_errors() {
        let mut place = pick_step(1, SkillKind::Place, "block/b1|demo");
        let plan = TaskPlan { name: "t".into(), steps: vec![place.clone()] };
        assert!(matches!(compile_task(&model(), &plan, &CompilationRules::default()), Err(Error::ArityMismatch { .. })));

        place.targets.push(id("block/b9|demo"));
        let plan = TaskPlan { name: "t".into(), steps: vec![place] };
        assert!(matches!(compile_task(&model(), &plan, &CompilationRules::default()), Err(Error::UnknownTarget(_))));

        let mut two = pick_step(1, SkillKind::PickLocalized, "block/b1|demo");
        two.params.wires.pop();
        let plan = TaskPlan { name: "t".into(), steps: vec![two] };
        assert!(matches!(
            compile_task(&model(), &plan, &CompilationRules::default()),
            Err(Error::InsufficientFeatures { got: 2 })
        ));

        let mut collinear = pick_step(1, SkillKind::Pick, "block/b1|demo");
        collinear.params.vertices = Some([0, 1, 1, 0]);
        let plan = TaskPlan { name: "t".into(), steps: vec![collinear] };
        assert!(matches!(compile_task(&model(), &plan, &CompilationRules::default()), Err(Error::DegenerateVertices(_))));
    }

    fn three_step_plan() -> TaskPlan {
        let mut place = pick_step(2, SkillKind::PlaceLocalized, "block/b1|demo");
        place.targets.push(id("block/b2|demo"));
        place.params.offset = Some(RigidTransform::from_translation(0.0, 0.0, 0.1));
        let scan = PlanStep {
            order: 3,
            skill: SkillKind::Scan,
            targets: vec![id("block/b2|demo")],
            params: StepParams {
                path: vec![RigidTransform::from_translation(0.0, 0.0, 0.2), RigidTransform::from_translation(0.01, 0.0, 0.2)],
                speed: Some(0.1),
                ..Default::default()
            },
        };
        TaskPlan {
            name: "three".into(),
            steps: vec![pick_step(1, SkillKind::PickLocalized, "block/b1|demo"), place, scan],
        }
    }

    #[test]
    fn recipe_round_trip_and_determinism() {
        let (recipe, locs) = compile_task(&model(), &three_step_plan(), &CompilationRules::default()).unwrap();
        assert_eq!(locs.len(), 2);
        let text = serialize_recipe(&recipe);
        assert_eq!(parse_recipe(&text).unwrap(), recipe);
        let (again, _) = compile_task(&model(), &three_step_plan(), &CompilationRules::default()).unwrap();
        assert_eq!(serialize_recipe(&again), text);
        let empty = ControlRecipe::new("e", vec![]);
        assert_eq!(parse_recipe(&serialize_recipe(&empty)).unwrap(), empty);
    }

    #[test]
    fn duplicate_order_is_one_violation() {
        let (mut recipe, _) = compile_task(&model(), &three_step_plan(), &CompilationRules::default()).unwrap();
        recipe.steps[1].order = 1;
        recipe.steps[2].order = 2;
        let v = validate_recipe(&recipe);
        assert_eq!(v.len(), 1, "{v:?}");
    }

    #[test]
    fn version_mismatch_and_parse_errors() {
        let text = serialize_recipe(&ControlRecipe::new("e", vec![])).replace("\"1\"", "\"2\"");
        assert!(matches!(parse_recipe(&text), Err(Error::VersionMismatch { .. })));
        let bad = r#"{"name":"x","version":"1","steps":[{"order":1,"skill":"fly","targets":[],"speed":1}]}"#;
        match parse_recipe(bad) {
            Err(Error::Parse { path, .. }) => assert!(path.contains("steps[0]"), "{path}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn object_pose_without_localization_is_violation() {
        let (mut recipe, _) = compile_task(&model(), &three_step_plan(), &CompilationRules::default()).unwrap();
        recipe.steps[2].path.as_mut().unwrap()[0].frame = FrameTag::Object(id("block/b2|demo"));
        assert_eq!(validate_recipe(&recipe).len(), 1);
    }

    #[test]
    fn skill_kind_names_round_trip() {
        for k in SkillKind::ALL {
            assert_eq!(k.name().parse::<SkillKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
            assert_eq!(k.is_composite(), k.name().ends_with("_localized"));
        }
    }
}

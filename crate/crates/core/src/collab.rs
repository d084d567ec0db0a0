//! Collaborative teaching: tracker calibration, the tracker → robot → camera
//! → object transform chain, a simulated tracker, and scan-task generation.

use serde::{Deserialize, Serialize};

use crate::error::{from_json_str, Error, Result};
use crate::features::LocalizationRecipe;
use crate::geom::{point_serde, umeyama_rigid, FrameTag, Point3, Pose, RigidTransform};
use crate::partmodel::PartId;
use crate::planner::{localization_ref, validate_recipe, ControlRecipe, PlanStep, SkillKind, SkillStep, StepParams, TaskPlan, DEFAULT_SPEED};
use crate::rng::{gaussian_vector, seeded};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationPairs {
    #[serde(with = "point_serde::vec")]
    pub robot_points: Vec<Point3>,
    #[serde(with = "point_serde::vec")]
    pub tracker_points: Vec<Point3>,
}

impl CalibrationPairs {
    pub fn from_json(text: &str) -> Result<Self> {
        from_json_str(text)
    }
}

/// Robot ← tracker transform from index-aligned point pairs.
pub fn calibrate_tracker(pairs: &CalibrationPairs) -> Result<RigidTransform> {
    umeyama_rigid(&pairs.tracker_points, &pairs.robot_points)
}

/// Object ← tracker chain: `T_camera_object⁻¹ · T_robot_camera⁻¹ · T_robot_tracker`.
pub fn object_from_tracker(
    t_robot_tracker: &RigidTransform,
    t_robot_camera: &RigidTransform,
    t_camera_object: &RigidTransform,
) -> RigidTransform {
    t_camera_object
        .inverse()
        .compose(&t_robot_camera.inverse())
        .compose(t_robot_tracker)
}

pub fn points_to_object_frame(
    points_tracker: &[Point3],
    t_robot_tracker: &RigidTransform,
    t_robot_camera: &RigidTransform,
    t_camera_object: &RigidTransform,
) -> Vec<Point3> {
    let chain = object_from_tracker(t_robot_tracker, t_robot_camera, t_camera_object);
    points_tracker.iter().map(|p| chain.transform_point(p)).collect()
}

/// Tracker readings of object-frame points, with seeded Gaussian noise.
pub fn simulate_tracker(
    t_camera_object: &RigidTransform,
    object_points: &[Point3],
    t_robot_tracker: &RigidTransform,
    t_robot_camera: &RigidTransform,
    sigma: f64,
    seed: u64,
) -> Vec<Point3> {
    let chain = t_robot_tracker
        .inverse()
        .compose(t_robot_camera)
        .compose(t_camera_object);
    let mut rng = seeded(seed);
    object_points
        .iter()
        .map(|p| {
            let q = chain.transform_point(p);
            if sigma > 0.0 {
                q + gaussian_vector(&mut rng, sigma)
            } else {
                q
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSource {
    Tracker,
    File,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaughtPath {
    pub part: PartId,
    /// Object frame.
    pub points: Vec<Point3>,
    pub source: PathSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointsFrame {
    Tracker,
    Object,
}

/// Taught-points document: points measured with the tracker, or already
/// expressed in the object frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaughtPointsFile {
    pub part: PartId,
    pub frame: PointsFrame,
    #[serde(with = "point_serde::vec")]
    pub points: Vec<Point3>,
}

impl TaughtPointsFile {
    pub fn from_json(text: &str) -> Result<Self> {
        from_json_str(text)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanOptions {
    /// Tool orientation at every path point, object frame.
    pub orientation: RigidTransform,
    pub speed: f64,
    pub name: String,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            orientation: tool_down(),
            speed: DEFAULT_SPEED,
            name: "taught_scan".into(),
        }
    }
}

/// Tool z-axis pointing along the object's −z (half turn about x).
pub fn tool_down() -> RigidTransform {
    RigidTransform::from_arrays([0.0; 3], [1.0, 0.0, 0.0, 0.0]).expect("unit quaternion")
}

/// Single ScanLocalized step following the taught points.
pub fn build_scan_task(
    path: &TaughtPath,
    localization: &LocalizationRecipe,
    options: &ScanOptions,
) -> Result<(TaskPlan, ControlRecipe)> {
    if localization.part != path.part {
        return Err(Error::UnknownPart(format!(
            "no localization recipe for {} (recipe is for {})",
            path.part, localization.part
        )));
    }
    if path.points.len() < 2 {
        return Err(Error::InvalidPlan(format!(
            "taught path for {} has {} point(s), at least 2 required",
            path.part,
            path.points.len()
        )));
    }
    let local: Vec<RigidTransform> = path
        .points
        .iter()
        .map(|p| options.orientation.with_translation(p.coords))
        .collect();
    let plan = TaskPlan {
        name: options.name.clone(),
        steps: vec![PlanStep {
            order: 1,
            skill: SkillKind::ScanLocalized,
            targets: vec![path.part.clone()],
            params: StepParams {
                wires: localization.features.iter().map(|f| f.feature_id.clone()).collect(),
                path: local.clone(),
                speed: Some(options.speed),
                ..Default::default()
            },
        }],
    };
    let frame = FrameTag::Object(path.part.clone());
    let recipe = ControlRecipe::new(
        options.name.clone(),
        vec![SkillStep {
            order: 1,
            skill: SkillKind::ScanLocalized,
            targets: vec![path.part.clone()],
            poses: None,
            path: Some(
                local
                    .into_iter()
                    .map(|transform| Pose {
                        transform,
                        frame: frame.clone(),
                    })
                    .collect(),
            ),
            localization_recipe: Some(localization_ref(&path.part)),
            speed: options.speed,
        }],
    );
    let violations = validate_recipe(&recipe);
    if !violations.is_empty() {
        return Err(Error::InvalidRecipe(violations.join("; ")));
    }
    Ok((plan, recipe))
}

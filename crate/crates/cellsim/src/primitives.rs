//! Built-in primitives, registered by opcode.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::Deserialize;
use serde_json::{json, Value};
use skillcell_core::geom::RigidTransform;
use skillcell_core::localizer::{observe, FeatureObservation};
use skillcell_core::rng::{mix_seed, seeded};

use crate::protocol::CellError;
use crate::sim::{CellCore, Grasp, Gripper};

/// One cell operation. Implementations must be deterministic in
/// (state, args); the caller restores the state if `apply` fails.
pub trait Primitive: Send + Sync {
    fn opcode(&self) -> &str;
    fn apply(&self, cell: &mut CellCore, args: &Value) -> Result<Value, CellError>;
}

#[derive(Clone, Default)]
pub struct PrimitiveRegistry {
    entries: BTreeMap<String, Arc<dyn Primitive>>,
}

impl PrimitiveRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Move { opcode: "MOVE_L" });
        r.register(Move { opcode: "MOVE_J" });
        r.register(GripClose);
        r.register(GripOpen);
        r.register(Capture);
        r.register(GetState);
        r
    }

    /// Adds or replaces the primitive for its opcode.
    pub fn register<P: Primitive + 'static>(&mut self, p: P) {
        self.entries.insert(p.opcode().to_string(), Arc::new(p));
    }

    pub fn get(&self, opcode: &str) -> Option<Arc<dyn Primitive>> {
        self.entries.get(opcode).cloned()
    }

    pub fn opcodes(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

fn parse_args<'de, T: Deserialize<'de>>(args: &'de Value) -> Result<T, CellError> {
    T::deserialize(args).map_err(|e| CellError::bad_args(e.to_string()))
}

fn no_args(args: &Value) -> Result<(), CellError> {
    match args.as_object() {
        Some(m) if m.is_empty() => Ok(()),
        _ => Err(CellError::bad_args("expected no arguments")),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MoveArgs {
    pose: RigidTransform,
    #[serde(default)]
    speed: Option<f64>,
}

/// Linear and joint moves share a tool-pose model: both end at the commanded
/// tool pose and take distance / speed seconds.
struct Move {
    opcode: &'static str,
}

impl Primitive for Move {
    fn opcode(&self) -> &str {
        self.opcode
    }

    fn apply(&self, cell: &mut CellCore, args: &Value) -> Result<Value, CellError> {
        let a: MoveArgs = parse_args(args)?;
        let speed = a.speed.unwrap_or(cell.config.default_speed);
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(CellError::bad_args(format!("speed must be positive, got {speed}")));
        }
        let in_base = cell.config.robot_base.inverse().transform_point(&a.pose.position());
        let h = cell.config.workspace_half_extent;
        if in_base.iter().any(|c| c.abs() > h) {
            return Err(CellError::new(
                "unreachable_pose",
                format!(
                    "tool position [{}, {}, {}] (robot frame) outside workspace",
                    in_base.x, in_base.y, in_base.z
                ),
            ));
        }
        let state = &mut cell.state;
        let distance = state.tcp_pose.translation_distance_to(&a.pose);
        state.sim_clock += distance / speed;
        state.tcp_pose = a.pose;
        if let Some(g) = &state.grasp {
            state.objects[g.object].pose = state.tcp_pose.compose(&g.tool_from_object);
        }
        Ok(json!({ "sim_clock": state.sim_clock }))
    }
}

struct GripClose;

impl Primitive for GripClose {
    fn opcode(&self) -> &str {
        "GRIP_CLOSE"
    }

    fn apply(&self, cell: &mut CellCore, args: &Value) -> Result<Value, CellError> {
        no_args(args)?;
        let state = &mut cell.state;
        if let Some(held) = state.held_object() {
            return Err(CellError::new("already_holding", held.to_string()));
        }
        let tip = state.tcp_pose.position();
        let nearest = state
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| (i, (o.pose.position() - tip).norm()))
            .filter(|&(_, d)| d <= cell.config.grasp_tolerance)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((index, _)) = nearest else {
            return Err(CellError::new(
                "nothing_to_grasp",
                format!("no object within {} of the tool", cell.config.grasp_tolerance),
            ));
        };
        state.grasp = Some(Grasp {
            object: index,
            tool_from_object: state.tcp_pose.inverse().compose(&state.objects[index].pose),
        });
        state.gripper = Gripper::Closed;
        Ok(json!({
            "held_object": state.objects[index].part,
            "sim_clock": state.sim_clock,
        }))
    }
}

struct GripOpen;

impl Primitive for GripOpen {
    fn opcode(&self) -> &str {
        "GRIP_OPEN"
    }

    fn apply(&self, cell: &mut CellCore, args: &Value) -> Result<Value, CellError> {
        no_args(args)?;
        let state = &mut cell.state;
        let Some(g) = state.grasp.take() else {
            return Err(CellError::new("not_holding", "gripper is empty"));
        };
        state.gripper = Gripper::Open;
        Ok(json!({
            "released": state.objects[g.object].part,
            "sim_clock": state.sim_clock,
        }))
    }
}

/// Observes every scene object from the camera. Per-object noise is seeded
/// from the object's seed and the capture index; the merged list is shuffled
/// with the cell seed so ids carry no object information.
struct Capture;

impl Primitive for Capture {
    fn opcode(&self) -> &str {
        "CAPTURE"
    }

    fn apply(&self, cell: &mut CellCore, args: &Value) -> Result<Value, CellError> {
        no_args(args)?;
        let camera_from_world = cell.config.world_from_camera().inverse();
        let n = cell.state.capture_count;
        let mut all: Vec<FeatureObservation> = Vec::new();
        for (placed, obj) in cell.scene.iter().zip(&cell.state.objects) {
            let pose = camera_from_world.compose(&obj.pose);
            all.extend(observe(
                &placed.recipe,
                &pose,
                placed.scene.noise_sigma,
                mix_seed(placed.scene.seed, n),
            ));
        }
        all.shuffle(&mut seeded(mix_seed(cell.seed, n)));
        for (k, o) in all.iter_mut().enumerate() {
            o.observed_id = format!("o{k}");
        }
        cell.state.capture_count += 1;
        Ok(json!({
            "observations": all,
            "sim_clock": cell.state.sim_clock,
        }))
    }
}

struct GetState;

impl Primitive for GetState {
    fn opcode(&self) -> &str {
        "GET_STATE"
    }

    fn apply(&self, cell: &mut CellCore, args: &Value) -> Result<Value, CellError> {
        no_args(args)?;
        Ok(cell.state.snapshot())
    }
}

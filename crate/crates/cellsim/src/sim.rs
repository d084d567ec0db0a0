use serde::Serialize;
use serde_json::Value;
use skillcell_core::geom::RigidTransform;
use skillcell_core::partmodel::PartId;

use crate::config::{CellConfig, PlacedObject};
use crate::primitives::PrimitiveRegistry;
use crate::protocol::CellError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Gripper {
    Open,
    Closed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grasp {
    pub object: usize,
    /// Tool ← object at the moment of grasping.
    pub tool_from_object: RigidTransform,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObjectState {
    pub part: PartId,
    /// World ← part.
    pub pose: RigidTransform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    /// Tool tip, world frame.
    pub tcp_pose: RigidTransform,
    pub gripper: Gripper,
    pub grasp: Option<Grasp>,
    pub sim_clock: f64,
    pub objects: Vec<ObjectState>,
    pub capture_count: u64,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    tcp_pose: &'a RigidTransform,
    gripper: Gripper,
    held_object: Option<&'a PartId>,
    sim_clock: f64,
    capture_count: u64,
    objects: &'a [ObjectState],
}

impl CellState {
    pub fn held_object(&self) -> Option<&PartId> {
        self.grasp.as_ref().map(|g| &self.objects[g.object].part)
    }

    pub fn snapshot(&self) -> Value {
        serde_json::to_value(Snapshot {
            tcp_pose: &self.tcp_pose,
            gripper: self.gripper,
            held_object: self.held_object(),
            sim_clock: self.sim_clock,
            capture_count: self.capture_count,
            objects: &self.objects,
        })
        .expect("snapshot serializes")
    }

    pub fn object_pose(&self, part: &PartId) -> Option<&RigidTransform> {
        self.objects.iter().find(|o| &o.part == part).map(|o| &o.pose)
    }
}

/// Everything a primitive may read or mutate.
pub struct CellCore {
    pub config: CellConfig,
    pub scene: Vec<PlacedObject>,
    pub state: CellState,
    /// Base seed for capture noise and observation shuffling.
    pub seed: u64,
}

/// Cell state machine; `apply` is a pure function of the state and the request.
pub struct CellSim {
    core: CellCore,
    registry: PrimitiveRegistry,
}

impl CellSim {
    pub fn new(config: CellConfig, scene: Vec<PlacedObject>, seed: u64) -> Self {
        Self::with_registry(config, scene, seed, PrimitiveRegistry::builtin())
    }

    pub fn with_registry(
        config: CellConfig,
        scene: Vec<PlacedObject>,
        seed: u64,
        registry: PrimitiveRegistry,
    ) -> Self {
        let world_from_camera = config.world_from_camera();
        let objects = scene
            .iter()
            .map(|o| ObjectState {
                part: o.scene.part.clone(),
                pose: world_from_camera.compose(&o.scene.true_pose),
            })
            .collect();
        let state = CellState {
            tcp_pose: config.home,
            gripper: Gripper::Open,
            grasp: None,
            sim_clock: 0.0,
            objects,
            capture_count: 0,
        };
        CellSim {
            core: CellCore {
                config,
                scene,
                state,
                seed,
            },
            registry,
        }
    }

    pub fn config(&self) -> &CellConfig {
        &self.core.config
    }

    pub fn state(&self) -> &CellState {
        &self.core.state
    }

    pub fn registry(&self) -> &PrimitiveRegistry {
        &self.registry
    }

    /// Dispatch one primitive by opcode. On error the state is unchanged.
    pub fn apply(&mut self, op: &str, args: &Value) -> Result<Value, CellError> {
        let prim = self
            .registry
            .get(op)
            .ok_or_else(|| CellError::new("unknown_op", op))?;
        let before = self.core.state.clone();
        let out = prim.apply(&mut self.core, args);
        if out.is_err() {
            self.core.state = before;
        }
        out
    }
}

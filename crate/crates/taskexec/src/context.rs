use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};
use skillcell_cellsim::{CellConfig, CellPort, LoadError};
use skillcell_core::features::LocalizationRecipe;
use skillcell_core::geom::{FrameTag, Pose, RigidTransform};
use skillcell_core::localizer::MatchTolerances;
use skillcell_core::partmodel::PartId;
use skillcell_core::planner::ControlRecipe;

use crate::error::ExecError;
use crate::trace::{EventKind, ExecutionTrace};

/// Localization recipes keyed by the reference used in control recipes.
#[derive(Clone, Debug, Default)]
pub struct LocalizationStore {
    recipes: BTreeMap<String, LocalizationRecipe>,
}

impl LocalizationStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, reference: impl Into<String>, recipe: LocalizationRecipe) {
        self.recipes.insert(reference.into(), recipe);
    }

    pub fn get(&self, reference: &str) -> Option<&LocalizationRecipe> {
        self.recipes.get(reference)
    }

    /// Load every recipe the control recipe references, relative to `dir`.
    pub fn load_for(recipe: &ControlRecipe, dir: &Path) -> Result<Self, LoadError> {
        let mut store = Self::new();
        for r in recipe.localization_refs() {
            let path = dir.join(r);
            let text = std::fs::read_to_string(&path).map_err(|source| LoadError::Io {
                path: path.clone(),
                source,
            })?;
            let loc = LocalizationRecipe::from_json(&text)
                .map_err(|source| LoadError::Core { path, source })?;
            store.insert(r, loc);
        }
        Ok(store)
    }
}

/// State shared by the skills of one run.
pub struct SkillContext<'a> {
    pub config: &'a CellConfig,
    pub store: &'a LocalizationStore,
    pub tolerances: MatchTolerances,
    pub reuse_localization: bool,
    /// World ← object, from the latest localization of each part.
    pub estimates: BTreeMap<PartId, RigidTransform>,
    port: &'a mut dyn CellPort,
    pub(crate) trace: ExecutionTrace,
    sim_time: f64,
}

impl<'a> SkillContext<'a> {
    pub fn new(
        config: &'a CellConfig,
        store: &'a LocalizationStore,
        port: &'a mut dyn CellPort,
    ) -> Self {
        SkillContext {
            config,
            store,
            tolerances: MatchTolerances::default(),
            reuse_localization: false,
            estimates: BTreeMap::new(),
            port,
            trace: ExecutionTrace::default(),
            sim_time: 0.0,
        }
    }

    pub fn trace(&self) -> &ExecutionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> ExecutionTrace {
        self.trace
    }

    pub fn record(&mut self, kind: EventKind, payload: Value) {
        self.trace.push(self.sim_time, kind, payload);
    }

    /// Send one primitive and record it.
    pub fn send(&mut self, order: u32, op: &str, args: Value) -> Result<Value, ExecError> {
        self.record(
            EventKind::PrimitiveSent,
            json!({ "order": order, "op": op, "args": args }),
        );
        let result = self
            .port
            .call(op, args)
            .map_err(|e| ExecError::from_client(op, e))?;
        if let Some(t) = result.get("sim_clock").and_then(Value::as_f64) {
            self.sim_time = t;
        }
        self.record(
            EventKind::PrimitiveDone,
            json!({ "order": order, "op": op, "result": result }),
        );
        Ok(result)
    }

    /// World-frame transform of a recipe pose.
    pub fn resolve(&self, pose: &Pose) -> Result<RigidTransform, ExecError> {
        match &pose.frame {
            FrameTag::World => Ok(pose.transform),
            FrameTag::Object(part) => self
                .estimates
                .get(part)
                .map(|w| w.compose(&pose.transform))
                .ok_or_else(|| ExecError::MissingLocalization(part.clone())),
        }
    }

    pub fn resolve_all<'p>(
        &self,
        poses: impl IntoIterator<Item = &'p Pose>,
    ) -> Result<Vec<RigidTransform>, ExecError> {
        poses.into_iter().map(|p| self.resolve(p)).collect()
    }
}

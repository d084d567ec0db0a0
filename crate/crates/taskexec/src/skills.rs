//! Atomic skills, registered by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};
use skillcell_core::geom::RigidTransform;
use skillcell_core::localizer::{estimate_object_pose, match_features, FeatureObservation};
use skillcell_core::planner::SkillKind;

use crate::context::SkillContext;
use crate::error::ExecError;
use crate::expand::Invocation;
use crate::trace::EventKind;

pub trait Skill: Send + Sync {
    /// Registry key; the built-ins use the recipe skill names.
    fn name(&self) -> &str;
    fn run(&self, inv: &Invocation, ctx: &mut SkillContext<'_>) -> Result<(), ExecError>;
}

#[derive(Clone, Default)]
pub struct SkillRegistry {
    entries: BTreeMap<String, Arc<dyn Skill>>,
}

impl SkillRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Pick);
        r.register(Place);
        r.register(Scan);
        r.register(LocalizeObject);
        r
    }

    pub fn register<S: Skill + 'static>(&mut self, s: S) {
        self.entries.insert(s.name().to_string(), Arc::new(s));
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn Skill>> {
        self.entries.get(name).cloned()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

fn move_l(ctx: &mut SkillContext<'_>, inv: &Invocation, pose: &RigidTransform) -> Result<(), ExecError> {
    ctx.send(inv.order, "MOVE_L", json!({ "pose": pose, "speed": inv.speed }))?;
    Ok(())
}

/// approach → action → gripper → departure. All poses are resolved before
/// the first primitive goes out.
fn grip_sequence(inv: &Invocation, ctx: &mut SkillContext<'_>, grip_op: &str) -> Result<(), ExecError> {
    let poses = inv
        .poses
        .as_ref()
        .ok_or_else(|| ExecError::InvalidRecipe(vec![format!("step {}: missing poses", inv.order)]))?;
    let world = ctx.resolve_all([&poses.approach, &poses.action, &poses.departure])?;
    move_l(ctx, inv, &world[0])?;
    move_l(ctx, inv, &world[1])?;
    ctx.send(inv.order, grip_op, json!({}))?;
    move_l(ctx, inv, &world[2])
}

struct Pick;

impl Skill for Pick {
    fn name(&self) -> &str {
        SkillKind::Pick.name()
    }

    fn run(&self, inv: &Invocation, ctx: &mut SkillContext<'_>) -> Result<(), ExecError> {
        grip_sequence(inv, ctx, "GRIP_CLOSE")
    }
}

struct Place;

impl Skill for Place {
    fn name(&self) -> &str {
        SkillKind::Place.name()
    }

    fn run(&self, inv: &Invocation, ctx: &mut SkillContext<'_>) -> Result<(), ExecError> {
        grip_sequence(inv, ctx, "GRIP_OPEN")
    }
}

struct Scan;

impl Skill for Scan {
    fn name(&self) -> &str {
        SkillKind::Scan.name()
    }

    fn run(&self, inv: &Invocation, ctx: &mut SkillContext<'_>) -> Result<(), ExecError> {
        let path = inv
            .path
            .as_ref()
            .ok_or_else(|| ExecError::InvalidRecipe(vec![format!("step {}: missing path", inv.order)]))?;
        let world = ctx.resolve_all(path)?;
        for p in &world {
            move_l(ctx, inv, p)?;
        }
        Ok(())
    }
}

/// Capture, match, estimate; stores world ← object for the target part.
struct LocalizeObject;

impl Skill for LocalizeObject {
    fn name(&self) -> &str {
        SkillKind::LocalizeObject.name()
    }

    fn run(&self, inv: &Invocation, ctx: &mut SkillContext<'_>) -> Result<(), ExecError> {
        let part = inv.targets[0].clone();
        if ctx.reuse_localization {
            if let Some(cached) = ctx.estimates.get(&part).copied() {
                ctx.record(
                    EventKind::LocalizationResult,
                    json!({
                        "order": inv.order,
                        "part": part,
                        "world_from_object": cached,
                        "matches": [],
                        "cached": true,
                    }),
                );
                return Ok(());
            }
        }
        let reference = inv.localization_recipe.as_deref().ok_or_else(|| {
            ExecError::InvalidRecipe(vec![format!(
                "step {}: no localization recipe for {part}",
                inv.order
            )])
        })?;
        let recipe = ctx
            .store
            .get(reference)
            .ok_or_else(|| ExecError::MissingLocalizationRecipe(reference.to_string()))?;
        if recipe.part != part {
            return Err(ExecError::InvalidRecipe(vec![format!(
                "step {}: {reference} describes {}, not {part}",
                inv.order, recipe.part
            )]));
        }
        let result = ctx.send(inv.order, "CAPTURE", json!({}))?;
        let observations: Vec<FeatureObservation> =
            serde_json::from_value(result.get("observations").cloned().unwrap_or(Value::Null)).map_err(
                |e| ExecError::Connection {
                    op: "CAPTURE".into(),
                    message: format!("unreadable observations: {e}"),
                },
            )?;
        let failed = |source| ExecError::LocalizationFailed {
            part: part.clone(),
            source,
        };
        let matches = match_features(&observations, recipe, ctx.tolerances).map_err(failed)?;
        let camera_from_object =
            estimate_object_pose(&matches, &observations, recipe).map_err(failed)?;
        let world_from_object = ctx.config.world_from_camera().compose(&camera_from_object);
        ctx.estimates.insert(part.clone(), world_from_object);
        ctx.record(
            EventKind::LocalizationResult,
            json!({
                "order": inv.order,
                "part": part,
                "world_from_object": world_from_object,
                "camera_from_object": camera_from_object,
                "matches": matches,
                "cached": false,
            }),
        );
        Ok(())
    }
}

use serde_json::json;
use skillcell_cellsim::{CellConfig, CellPort};
use skillcell_core::localizer::MatchTolerances;
use skillcell_core::planner::{validate_recipe, ControlRecipe};

use crate::context::{LocalizationStore, SkillContext};
use crate::error::ExecError;
use crate::expand::expand_skill;
use crate::skills::SkillRegistry;
use crate::trace::{EventKind, ExecutionTrace};

#[derive(Clone, Debug, Default)]
pub struct ExecOptions {
    pub tolerances: MatchTolerances,
    /// Skip re-localizing a part that already has an estimate in this run.
    pub reuse_localization: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub trace: ExecutionTrace,
    /// The error that stopped the run, if any; it is also the trace's
    /// `error` event.
    pub error: Option<ExecError>,
}

/// Run the recipe steps strictly in order over `port`. The first failure
/// stops the run; the trace then ends with `error` followed by `task_end`.
pub fn interpret(
    recipe: &ControlRecipe,
    config: &CellConfig,
    port: &mut dyn CellPort,
    store: &LocalizationStore,
    registry: &SkillRegistry,
    options: &ExecOptions,
) -> RunOutcome {
    let mut ctx = SkillContext::new(config, store, port);
    ctx.tolerances = options.tolerances;
    ctx.reuse_localization = options.reuse_localization;
    ctx.record(
        EventKind::TaskStart,
        json!({ "recipe": recipe.name, "steps": recipe.steps.len() }),
    );

    let mut completed = 0usize;
    let result = run_steps(recipe, registry, &mut ctx, &mut completed);
    if let Err((order, e)) = &result {
        let mut payload = json!({ "category": e.category(), "message": e.to_string() });
        if let Some(o) = order {
            payload["order"] = json!(o);
        }
        ctx.record(EventKind::Error, payload);
    }
    let status = if result.is_ok() { "ok" } else { "error" };
    ctx.record(
        EventKind::TaskEnd,
        json!({ "status": status, "steps_completed": completed }),
    );
    RunOutcome {
        trace: ctx.into_trace(),
        error: result.err().map(|(_, e)| e),
    }
}

fn run_steps(
    recipe: &ControlRecipe,
    registry: &SkillRegistry,
    ctx: &mut SkillContext<'_>,
    completed: &mut usize,
) -> Result<(), (Option<u32>, ExecError)> {
    let violations = validate_recipe(recipe);
    if !violations.is_empty() {
        return Err((None, ExecError::InvalidRecipe(violations)));
    }
    for r in recipe.localization_refs() {
        if ctx.store.get(r).is_none() {
            return Err((None, ExecError::MissingLocalizationRecipe(r.to_string())));
        }
    }
    for step in &recipe.steps {
        let order = step.order;
        ctx.record(
            EventKind::SkillStart,
            json!({ "order": order, "skill": step.skill, "depth": 0, "targets": step.targets }),
        );
        for inv in expand_skill(step) {
            ctx.record(
                EventKind::SkillStart,
                json!({ "order": order, "skill": inv.skill, "depth": 1, "targets": inv.targets }),
            );
            let skill = registry
                .get(inv.skill.name())
                .ok_or_else(|| (Some(order), ExecError::UnknownSkill(inv.skill.name().into())))?;
            skill.run(&inv, ctx).map_err(|e| (Some(order), e))?;
            ctx.record(
                EventKind::SkillEnd,
                json!({ "order": order, "skill": inv.skill, "depth": 1 }),
            );
        }
        ctx.record(
            EventKind::SkillEnd,
            json!({ "order": order, "skill": step.skill, "depth": 0 }),
        );
        *completed += 1;
    }
    Ok(())
}

use skillcell_core::geom::Pose;
use skillcell_core::partmodel::PartId;
use skillcell_core::planner::{NamedPoses, SkillKind, SkillStep};

/// One atomic skill to run, with the parameters it needs.
#[derive(Clone, Debug, PartialEq)]
pub struct Invocation {
    pub order: u32,
    pub skill: SkillKind,
    pub targets: Vec<PartId>,
    pub poses: Option<NamedPoses>,
    pub path: Option<Vec<Pose>>,
    pub localization_recipe: Option<String>,
    pub speed: f64,
}

/// Composite steps become `[localize_object(part), base skill]`; atomic
/// steps stay as they are. Depends only on the step.
pub fn expand_skill(step: &SkillStep) -> Vec<Invocation> {
    let atomic = Invocation {
        order: step.order,
        skill: step.skill.base(),
        targets: step.targets.clone(),
        poses: step.poses.clone(),
        path: step.path.clone(),
        localization_recipe: None,
        speed: step.speed,
    };
    match (step.skill.is_composite(), step.localized_part()) {
        (true, Some(part)) => vec![
            Invocation {
                order: step.order,
                skill: SkillKind::LocalizeObject,
                targets: vec![part.clone()],
                poses: None,
                path: None,
                localization_recipe: step.localization_recipe.clone(),
                speed: step.speed,
            },
            atomic,
        ],
        _ => vec![Invocation {
            localization_recipe: step.localization_recipe.clone(),
            ..atomic
        }],
    }
}

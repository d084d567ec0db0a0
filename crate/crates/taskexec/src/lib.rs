//! Task and skill layers.
//!
//! A control recipe is executed step by step. Composite steps are expanded
//! into their constituent atomic skills, each atomic skill is looked up by
//! name in a [`SkillRegistry`] and drives the cell through primitives. Every
//! action is recorded in an [`ExecutionTrace`].

pub mod context;
pub mod error;
pub mod expand;
pub mod interpret;
pub mod skills;
pub mod trace;
pub mod verify;

pub use context::{LocalizationStore, SkillContext};
pub use error::ExecError;
pub use expand::{expand_skill, Invocation};
pub use interpret::{interpret, ExecOptions, RunOutcome};
pub use skills::{Skill, SkillRegistry};
pub use trace::{EventKind, ExecutionTrace, TraceEvent};
pub use verify::{primitive_ops, replay_primitives, verify_trace};

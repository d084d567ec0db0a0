//! Execution trace: a JSON array of events.
//!
//! ```text
//! {"wall_seq": 0, "sim_time": 0.0, "kind": "task_start", "payload": {...}}
//! ```
//!
//! | kind                  | payload                                              |
//! |-----------------------|------------------------------------------------------|
//! | `task_start`          | `recipe`, `steps`                                    |
//! | `skill_start`/`_end`  | `order`, `skill`, `depth` (0 = step, 1 = constituent), `targets` on start |
//! | `primitive_sent`      | `order`, `op`, `args`                                |
//! | `primitive_done`      | `order`, `op`, `result`                              |
//! | `localization_result` | `order`, `part`, `world_from_object`, `camera_from_object` (absent when cached), `matches`, `cached` |
//! | `error`               | `order` (absent before the first step), `category`, `message` |
//! | `task_end`            | `status` (`ok`/`error`), `steps_completed`           |
//!
//! `sim_time` is the latest cell clock reported before the event.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TaskStart,
    SkillStart,
    SkillEnd,
    PrimitiveSent,
    PrimitiveDone,
    LocalizationResult,
    TaskEnd,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub wall_seq: u64,
    pub sim_time: f64,
    pub kind: EventKind,
    pub payload: Value,
}

impl TraceEvent {
    pub fn order(&self) -> Option<u32> {
        self.payload.get("order").and_then(Value::as_u64).map(|o| o as u32)
    }

    pub fn depth(&self) -> Option<u64> {
        self.payload.get("depth").and_then(Value::as_u64)
    }

    pub fn str_field(&self, key: &str) -> Option<&str> {
        self.payload.get(key).and_then(Value::as_str)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExecutionTrace {
    pub events: Vec<TraceEvent>,
}

impl ExecutionTrace {
    pub fn from_json(text: &str) -> skillcell_core::Result<Self> {
        skillcell_core::error::from_json_str(text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }

    pub(crate) fn push(&mut self, sim_time: f64, kind: EventKind, payload: Value) {
        let wall_seq = self.events.len() as u64;
        self.events.push(TraceEvent {
            wall_seq,
            sim_time,
            kind,
            payload,
        });
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Orders of the top-level skill_start events.
    pub fn step_orders(&self) -> Vec<u32> {
        self.of_kind(EventKind::SkillStart)
            .filter(|e| e.depth() == Some(0))
            .filter_map(TraceEvent::order)
            .collect()
    }

    /// Opcodes of primitive_sent events, in order.
    pub fn sent_ops(&self) -> Vec<&str> {
        self.of_kind(EventKind::PrimitiveSent)
            .filter_map(|e| e.str_field("op"))
            .collect()
    }

    pub fn succeeded(&self) -> bool {
        self.events
            .last()
            .is_some_and(|e| e.kind == EventKind::TaskEnd && e.str_field("status") == Some("ok"))
    }
}

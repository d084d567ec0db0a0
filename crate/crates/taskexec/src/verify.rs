//! Structural checks on execution traces.

use serde_json::Value;
use skillcell_cellsim::CellPort;
use skillcell_core::planner::{ControlRecipe, SkillKind};

use crate::expand::{expand_skill, Invocation};
use crate::trace::{EventKind, ExecutionTrace, TraceEvent};

/// Primitive opcodes an atomic skill sends when it runs to completion
/// (a cached localization sends none).
pub fn primitive_ops(inv: &Invocation) -> Vec<&'static str> {
    match inv.skill {
        SkillKind::Pick => vec!["MOVE_L", "MOVE_L", "GRIP_CLOSE", "MOVE_L"],
        SkillKind::Place => vec!["MOVE_L", "MOVE_L", "GRIP_OPEN", "MOVE_L"],
        SkillKind::Scan => vec!["MOVE_L"; inv.path.as_ref().map_or(0, Vec::len)],
        SkillKind::LocalizeObject => vec!["CAPTURE"],
        _ => Vec::new(),
    }
}

fn skill_of(e: &TraceEvent) -> Option<SkillKind> {
    e.payload
        .get("skill")
        .cloned()
        .and_then(|v| serde_json::from_value(v).ok())
}

struct Constituent {
    order: u32,
    skill: SkillKind,
    ops: Vec<String>,
    cached: bool,
}

/// Check `trace` against `recipe`; an empty list means the trace is
/// consistent with a fail-fast, strictly sequential run of the recipe.
pub fn verify_trace(trace: &ExecutionTrace, recipe: &ControlRecipe) -> Vec<String> {
    let mut v = Vec::new();
    let ev = &trace.events;
    if ev.is_empty() {
        return vec!["trace is empty".into()];
    }
    for w in ev.windows(2) {
        if w[1].wall_seq <= w[0].wall_seq {
            v.push(format!("wall_seq {} does not increase after {}", w[1].wall_seq, w[0].wall_seq));
        }
    }
    if ev[0].kind != EventKind::TaskStart {
        v.push("first event is not task_start".into());
    }
    let last = ev.last().expect("non-empty");
    if last.kind != EventKind::TaskEnd {
        v.push("last event is not task_end".into());
    }
    let starts = trace.of_kind(EventKind::TaskStart).count();
    let ends = trace.of_kind(EventKind::TaskEnd).count();
    if starts != 1 || ends != 1 {
        v.push(format!("{starts} task_start and {ends} task_end events, expected one each"));
    }
    let errors: Vec<usize> = (0..ev.len()).filter(|&i| ev[i].kind == EventKind::Error).collect();
    match errors.as_slice() {
        [] => {
            if last.str_field("status") != Some("ok") {
                v.push("task_end status is not ok although no error was recorded".into());
            }
        }
        [i] => {
            if *i + 2 != ev.len() {
                v.push("error event is not immediately followed by the final task_end".into());
            }
            if last.str_field("status") != Some("error") {
                v.push("task_end status is not error after an error event".into());
            }
        }
        _ => v.push(format!("{} error events, at most one allowed", errors.len())),
    }

    // top-level order must be a prefix of the recipe
    let orders = trace.step_orders();
    let expected: Vec<u32> = recipe.steps.iter().map(|s| s.order).collect();
    if orders.len() > expected.len() || orders[..] != expected[..orders.len()] {
        v.push(format!("step orders {orders:?} are not a prefix of {expected:?}"));
    }

    // nesting, interleaving and per-constituent primitive sequences
    let mut step: Option<(u32, SkillKind)> = None;
    let mut current: Option<Constituent> = None;
    let mut done: Vec<(u32, Vec<Constituent>)> = Vec::new();
    let mut pending_sent: Option<String> = None;
    let mut last_done_time = f64::NEG_INFINITY;
    let mut failed = false;
    for e in ev {
        match e.kind {
            EventKind::SkillStart => {
                let (Some(order), Some(skill), Some(depth)) = (e.order(), skill_of(e), e.depth()) else {
                    v.push(format!("event {}: skill_start without order/skill/depth", e.wall_seq));
                    continue;
                };
                if depth == 0 {
                    if step.is_some() {
                        v.push(format!("event {}: step {order} starts inside another step", e.wall_seq));
                    }
                    step = Some((order, skill));
                    done.push((order, Vec::new()));
                } else {
                    if step.map(|s| s.0) != Some(order) || current.is_some() {
                        v.push(format!("event {}: constituent {skill} outside its step", e.wall_seq));
                    }
                    current = Some(Constituent {
                        order,
                        skill,
                        ops: Vec::new(),
                        cached: false,
                    });
                }
            }
            EventKind::SkillEnd => {
                let (order, skill, depth) = (e.order(), skill_of(e), e.depth());
                if depth == Some(1) {
                    match current.take() {
                        Some(c) if Some(c.order) == order && Some(c.skill) == skill => {
                            if let Some((_, list)) = done.last_mut() {
                                list.push(c);
                            }
                        }
                        _ => v.push(format!("event {}: unmatched constituent skill_end", e.wall_seq)),
                    }
                } else {
                    if step.map(|s| (Some(s.0), Some(s.1))) != Some((order, skill)) || current.is_some() {
                        v.push(format!("event {}: unmatched step skill_end", e.wall_seq));
                    }
                    step = None;
                }
            }
            EventKind::PrimitiveSent | EventKind::PrimitiveDone => {
                let op = e.str_field("op").unwrap_or_default().to_string();
                match &mut current {
                    Some(c) if e.order() == Some(c.order) => {
                        if e.kind == EventKind::PrimitiveSent {
                            if pending_sent.is_some() {
                                v.push(format!("event {}: {op} sent while another primitive is in flight", e.wall_seq));
                            }
                            c.ops.push(op.clone());
                            pending_sent = Some(op);
                        } else if pending_sent.take().as_deref() != Some(op.as_str()) {
                            v.push(format!("event {}: {op} done without matching send", e.wall_seq));
                        }
                    }
                    _ => v.push(format!("event {}: primitive {op} outside a running skill", e.wall_seq)),
                }
                if e.kind == EventKind::PrimitiveDone {
                    if e.sim_time < last_done_time {
                        v.push(format!("event {}: sim_time decreases", e.wall_seq));
                    }
                    last_done_time = e.sim_time;
                }
            }
            EventKind::LocalizationResult => match &mut current {
                Some(c) if c.skill == SkillKind::LocalizeObject => {
                    c.cached = e.payload.get("cached").and_then(Value::as_bool) == Some(true);
                }
                _ => v.push(format!("event {}: localization_result outside localize_object", e.wall_seq)),
            },
            EventKind::Error => failed = true,
            EventKind::TaskStart | EventKind::TaskEnd => {}
        }
    }
    if !failed && (step.is_some() || current.is_some()) {
        v.push("a skill is still open at task_end without an error".into());
    }

    // constituents against the syntactic expansion of each step
    for (order, constituents) in &done {
        let Some(rs) = recipe.steps.iter().find(|s| s.order == *order) else {
            continue;
        };
        let expansion = expand_skill(rs);
        let kinds: Vec<SkillKind> = constituents.iter().map(|c| c.skill).collect();
        let want: Vec<SkillKind> = expansion.iter().map(|i| i.skill).collect();
        let finished = !failed || Some(*order) != done.last().map(|d| d.0);
        let ok = if finished {
            kinds == want
        } else {
            kinds.len() <= want.len() && kinds[..] == want[..kinds.len()]
        };
        if !ok {
            v.push(format!("step {order}: constituents {kinds:?}, expected {want:?}"));
        }
        for (c, inv) in constituents.iter().zip(&expansion) {
            let want_ops: Vec<&str> = if c.cached { Vec::new() } else { primitive_ops(inv) };
            if c.ops != want_ops {
                v.push(format!("step {order} {}: primitives {:?}, expected {want_ops:?}", c.skill, c.ops));
            }
        }
    }
    v
}

/// Re-send every primitive of `trace` to `port` (normally a fresh cell)
/// and report each primitive_done whose clock is not reproduced exactly.
pub fn replay_primitives(trace: &ExecutionTrace, port: &mut dyn CellPort) -> Vec<String> {
    let mut v = Vec::new();
    let mut last: Option<Value> = None;
    for e in &trace.events {
        match e.kind {
            EventKind::PrimitiveSent => {
                let op = e.str_field("op").unwrap_or_default();
                let args = e.payload.get("args").cloned().unwrap_or(Value::Null);
                last = port.call(op, args).ok();
            }
            EventKind::PrimitiveDone => {
                let replayed = last.take().and_then(|r| r.get("sim_clock").and_then(Value::as_f64));
                if replayed.map(f64::to_bits) != Some(e.sim_time.to_bits()) {
                    v.push(format!(
                        "event {}: sim_time {} replayed as {replayed:?}",
                        e.wall_seq, e.sim_time
                    ));
                }
            }
            _ => {}
        }
    }
    v
}

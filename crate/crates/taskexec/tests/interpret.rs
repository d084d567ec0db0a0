use serde_json::json;
use skillcell_cellsim::{demo, serve, CellClient, CellConfig, CellPort, CellSim};
use skillcell_core::geom::{Pose, RigidTransform};
use skillcell_core::planner::{
    compile_task, localization_ref, offset_pose, Axis, CompilationRules, ControlRecipe, NamedPoses, SkillKind,
    SkillStep,
};
use skillcell_taskexec::{
    expand_skill, interpret, replay_primitives, verify_trace, EventKind, ExecError, ExecOptions, LocalizationStore,
    SkillContext, SkillRegistry,
};

fn fresh_sim() -> CellSim {
    CellSim::new(demo::cell_config(), demo::default_placed_scene(0.0, 4), 9)
}

fn demo_recipe() -> (ControlRecipe, LocalizationStore) {
    let (recipe, locs) = compile_task(&demo::assembly(), &demo::plan(), &CompilationRules::default()).unwrap();
    let mut store = LocalizationStore::new();
    for l in locs {
        store.insert(localization_ref(&l.part), l);
    }
    (recipe, store)
}

fn named(action: RigidTransform) -> NamedPoses {
    let action = Pose::world(action);
    NamedPoses {
        approach: offset_pose(&action, Axis::PosZ, 0.05),
        departure: offset_pose(&action, Axis::PosZ, 0.08),
        action,
    }
}

fn pick_then_place() -> ControlRecipe {
    let place_at = RigidTransform::from_translation(0.3, -0.4, 0.02);
    ControlRecipe::new(
        "pick_place",
        vec![
            SkillStep {
                order: 1,
                skill: SkillKind::Pick,
                targets: vec![demo::block_id()],
                poses: Some(named(demo::block_world_pose())),
                path: None,
                localization_recipe: None,
                speed: 0.5,
            },
            SkillStep {
                order: 2,
                skill: SkillKind::Place,
                targets: vec![demo::block_id(), demo::base_id()],
                poses: Some(named(place_at)),
                path: None,
                localization_recipe: None,
                speed: 0.5,
            },
        ],
    )
}

fn run(recipe: &ControlRecipe, store: &LocalizationStore, port: &mut dyn CellPort) -> skillcell_taskexec::RunOutcome {
    interpret(
        recipe,
        &demo::cell_config(),
        port,
        store,
        &SkillRegistry::builtin(),
        &ExecOptions::default(),
    )
}

#[test]
fn expansion_follows_composite_definitions() {
    let (recipe, _) = demo_recipe();
    let kinds = |s: &SkillStep| expand_skill(s).iter().map(|i| i.skill).collect::<Vec<_>>();
    assert_eq!(kinds(&recipe.steps[0]), [SkillKind::LocalizeObject]);
    assert_eq!(kinds(&recipe.steps[1]), [SkillKind::LocalizeObject, SkillKind::Pick]);
    assert_eq!(kinds(&recipe.steps[2]), [SkillKind::LocalizeObject, SkillKind::Place]);
    // place localizes the part it places onto
    assert_eq!(expand_skill(&recipe.steps[2])[0].targets, vec![demo::base_id()]);
    let pick = &pick_then_place().steps[0];
    assert_eq!(kinds(pick), [SkillKind::Pick]);
    let mut scan = pick.clone();
    scan.skill = SkillKind::ScanLocalized;
    assert_eq!(kinds(&scan), [SkillKind::LocalizeObject, SkillKind::Scan]);
}

#[test]
fn empty_recipe_gives_start_and_end_only() {
    let mut sim = fresh_sim();
    let out = run(&ControlRecipe::new("empty", vec![]), &LocalizationStore::new(), &mut sim);
    assert!(out.error.is_none());
    let kinds: Vec<_> = out.trace.events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds, [EventKind::TaskStart, EventKind::TaskEnd]);
}

#[test]
fn pick_over_loopback_sends_the_pick_primitives() {
    let handle = serve(fresh_sim(), "127.0.0.1:0").unwrap();
    let mut client = CellClient::connect(handle.local_addr()).unwrap();
    let mut recipe = pick_then_place();
    recipe.steps.truncate(1);
    let out = run(&recipe, &LocalizationStore::new(), &mut client);
    assert!(out.error.is_none(), "{:?}", out.error);
    assert_eq!(out.trace.sent_ops(), ["MOVE_L", "MOVE_L", "GRIP_CLOSE", "MOVE_L"]);
    client.close().unwrap();
    let sim = handle.stop();
    assert_eq!(sim.state().held_object(), Some(&demo::block_id()));
}

#[test]
fn two_steps_run_in_order_without_interleaving() {
    let mut sim = fresh_sim();
    let recipe = pick_then_place();
    let out = run(&recipe, &LocalizationStore::new(), &mut sim);
    assert!(out.error.is_none(), "{:?}", out.error);
    assert_eq!(out.trace.step_orders(), [1, 2]);
    let orders: Vec<u32> = out
        .trace
        .of_kind(EventKind::PrimitiveSent)
        .filter_map(|e| e.order())
        .collect();
    assert!(orders.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(verify_trace(&out.trace, &recipe), Vec::<String>::new());
    assert!(out.trace.succeeded());
}

#[test]
fn unreachable_pose_stops_the_run() {
    let mut sim = fresh_sim();
    let mut recipe = pick_then_place();
    recipe.steps[0].poses = Some(named(RigidTransform::from_translation(5.0, 0.0, 0.0)));
    let out = run(&recipe, &LocalizationStore::new(), &mut sim);
    match &out.error {
        Some(ExecError::Cell { error, .. }) => assert_eq!(error.code, "unreachable_pose"),
        other => panic!("unexpected {other:?}"),
    }
    let ev = &out.trace.events;
    assert_eq!(ev[ev.len() - 2].kind, EventKind::Error);
    assert_eq!(ev[ev.len() - 1].kind, EventKind::TaskEnd);
    assert_eq!(out.trace.step_orders(), [1]);
    assert_eq!(verify_trace(&out.trace, &recipe), Vec::<String>::new());
}

#[test]
fn localization_recovers_true_world_pose() {
    let (recipe, store) = demo_recipe();
    let mut sim = fresh_sim();
    let config = demo::cell_config();
    let mut ctx = SkillContext::new(&config, &store, &mut sim);
    let inv = &expand_skill(&recipe.steps[0])[0];
    SkillRegistry::builtin()
        .get("localize_object")
        .unwrap()
        .run(inv, &mut ctx)
        .unwrap();
    let est = ctx.estimates[&demo::base_id()];
    assert!(est.translation_distance_to(&demo::base_world_pose()) < 1e-6);
    assert!(est.rotation_angle_to(&demo::base_world_pose()) < 1e-6);
}

#[test]
fn object_frame_pose_without_localization_fails_before_sending() {
    let (recipe, store) = demo_recipe();
    let mut sim = fresh_sim();
    let config = demo::cell_config();
    let mut ctx = SkillContext::new(&config, &store, &mut sim);
    let pick = &expand_skill(&recipe.steps[1])[1];
    assert_eq!(pick.skill, SkillKind::Pick);
    let err = SkillRegistry::builtin().get("pick").unwrap().run(pick, &mut ctx).unwrap_err();
    assert!(matches!(err, ExecError::MissingLocalization(ref p) if *p == demo::block_id()));
    assert!(ctx.trace().events.is_empty());
}

#[test]
fn resolved_poses_are_exact_compositions() {
    let (recipe, store) = demo_recipe();
    let config = CellConfig::default();
    let mut sim = fresh_sim();
    let mut ctx = SkillContext::new(&config, &store, &mut sim);
    let w = demo::block_world_pose();
    ctx.estimates.insert(demo::block_id(), w);
    for p in recipe.steps[1].all_poses() {
        assert_eq!(ctx.resolve(p).unwrap(), w.compose(&p.transform));
    }
}

#[test]
fn demo_task_assembles_the_block() {
    let (recipe, store) = demo_recipe();
    let mut sim = fresh_sim();
    let out = run(&recipe, &store, &mut sim);
    assert!(out.error.is_none(), "{:?}", out.error);
    assert_eq!(verify_trace(&out.trace, &recipe), Vec::<String>::new());
    let place = recipe.steps[2].poses.as_ref().unwrap();
    let target = demo::base_world_pose().compose(&place.action.transform);
    let block = sim.state().object_pose(&demo::block_id()).unwrap();
    assert!(block.translation_distance_to(&target) < 1e-6);
    assert!(block.rotation_angle_to(&target) < 1e-6);
    assert_eq!(out.trace.of_kind(EventKind::LocalizationResult).count(), 3);
}

#[test]
fn reuse_flag_skips_repeated_capture() {
    let (recipe, store) = demo_recipe();
    let mut sim = fresh_sim();
    let out = interpret(
        &recipe,
        &demo::cell_config(),
        &mut sim,
        &store,
        &SkillRegistry::builtin(),
        &ExecOptions {
            reuse_localization: true,
            ..ExecOptions::default()
        },
    );
    assert!(out.error.is_none());
    // base is localized in step 1 and reused in step 3
    assert_eq!(out.trace.sent_ops().iter().filter(|o| **o == "CAPTURE").count(), 2);
    assert_eq!(verify_trace(&out.trace, &recipe), Vec::<String>::new());
}

#[test]
fn replay_reproduces_sim_times() {
    let (recipe, store) = demo_recipe();
    let mut sim = fresh_sim();
    let out = run(&recipe, &store, &mut sim);
    let mut again = fresh_sim();
    assert_eq!(replay_primitives(&out.trace, &mut again), Vec::<String>::new());
    assert_eq!(again.state(), sim.state());
}

#[test]
fn missing_skill_and_recipe_are_reported() {
    let (recipe, store) = demo_recipe();
    let mut sim = fresh_sim();
    let out = run(&recipe, &LocalizationStore::new(), &mut sim);
    assert_eq!(out.error.unwrap().category(), "MissingLocalizationRecipe");
    assert!(out.trace.step_orders().is_empty());

    let out = interpret(
        &recipe,
        &demo::cell_config(),
        &mut sim,
        &store,
        &SkillRegistry::empty(),
        &ExecOptions::default(),
    );
    assert_eq!(out.error.unwrap().category(), "UnknownSkill");
}

#[test]
fn trace_round_trips_and_tampering_is_detected() {
    let (recipe, store) = demo_recipe();
    let mut sim = fresh_sim();
    let out = run(&recipe, &store, &mut sim);
    let text = out.trace.to_json();
    let back = skillcell_taskexec::ExecutionTrace::from_json(&text).unwrap();
    assert_eq!(back, out.trace);

    let mut swapped = out.trace.clone();
    let i = swapped.events.iter().position(|e| e.str_field("op") == Some("GRIP_CLOSE")).unwrap();
    swapped.events[i].payload["op"] = json!("GRIP_OPEN");
    assert!(!verify_trace(&swapped, &recipe).is_empty());

    let mut dropped = out.trace.clone();
    dropped.events.retain(|e| !(e.kind == EventKind::SkillStart && e.order() == Some(2)));
    for (k, e) in dropped.events.iter_mut().enumerate() {
        e.wall_seq = k as u64;
    }
    assert!(!verify_trace(&dropped, &recipe).is_empty());
}

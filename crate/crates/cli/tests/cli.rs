use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use skillcell_cellsim::demo;
use skillcell_core::collab::{simulate_tracker, CalibrationPairs, PointsFrame, TaughtPointsFile};
use skillcell_core::geom::{Point3, RigidTransform, Vector3};
use skillcell_core::partmodel::AssemblyModel;
use skillcell_core::planner::{parse_recipe, TaskPlan};
use skillcell_taskexec::{EventKind, ExecutionTrace};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_skillcell");

fn demo_dir() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (name, content) in demo::files() {
        std::fs::write(dir.path().join(name), content).unwrap();
    }
    dir
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_category(o: &Output, category: &str) {
    assert!(!o.status.success());
    let err = stderr(o);
    assert_eq!(err.lines().count(), 1, "single-line error expected: {err}");
    assert!(err.starts_with(&format!("error[{category}]: ")), "{err}");
    assert_eq!(o.status.code(), Some(skillcell_cli::exit_code(category)));
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn files_in(dir: &TempDir) -> Vec<PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn plan_writes_recipe_and_localization_recipes_deterministically() {
    let d = demo_dir();
    for out in ["a.recipe.json", "b.recipe.json"] {
        let o = cli(&["plan", "--assembly", &p(&d, "demo.asm.json"), "--plan", &p(&d, "demo.plan.json"), "--out", &p(&d, out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(read(d.path().join("a.recipe.json")), read(d.path().join("b.recipe.json")));
    let recipe = parse_recipe(&read(d.path().join("a.recipe.json"))).unwrap();
    assert_eq!(recipe.steps.len(), 3);
    for r in recipe.localization_refs() {
        assert!(d.path().join(r).exists());
    }
}

#[test]
fn extract_after_annotate_reproduces_the_plan() {
    let d = demo_dir();
    let o = cli(&["annotate", "--assembly", &p(&d, "demo.asm.json"), "--plan", &p(&d, "demo.plan.json"), "--out", &p(&d, "ann.asm.json")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = AssemblyModel::from_json(&read(d.path().join("ann.asm.json"))).unwrap();
    assert_eq!(model.annotations.len(), 3);
    let o = cli(&["extract", "--assembly", &p(&d, "ann.asm.json"), "--out", &p(&d, "back.plan.json")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let back = TaskPlan::from_json(&read(d.path().join("back.plan.json"))).unwrap();
    assert_eq!(back.skeleton(), demo::plan().skeleton());
    assert_eq!(back.name, demo::ASSEMBLY);
}

#[test]
fn localized_step_on_two_feature_part_is_rejected() {
    let d = demo_dir();
    let mut plan = demo::plan();
    plan.steps[1].params.wires.truncate(2);
    std::fs::write(d.path().join("two.plan.json"), plan.to_json()).unwrap();
    let before = files_in(&d);
    let o = cli(&["plan", "--assembly", &p(&d, "demo.asm.json"), "--plan", &p(&d, "two.plan.json"), "--out", &p(&d, "x.recipe.json")]);
    assert_category(&o, "InsufficientFeatures");
    assert_eq!(files_in(&d), before, "nothing written on failure");
}

#[test]
fn locgen_writes_one_recipe() {
    let d = demo_dir();
    let o = cli(&[
        "locgen", "--assembly", &p(&d, "demo.asm.json"), "--part", "block/block1|demo",
        "--wires", "b0,b1,b2", "--out", &p(&d, "block.loc.json"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = cli(&[
        "locgen", "--assembly", &p(&d, "demo.asm.json"), "--part", "block/block1|demo",
        "--wires", "b0,b1", "--out", &p(&d, "short.loc.json"),
    ]);
    assert_category(&o, "InsufficientFeatures");
    let o = cli(&[
        "locgen", "--assembly", &p(&d, "demo.asm.json"), "--part", "block/block1",
        "--wires", "b0,b1,b2", "--out", &p(&d, "bad.loc.json"),
    ]);
    assert_category(&o, "MalformedId");
}

#[test]
fn empty_recipe_runs_to_start_and_end() {
    let d = demo_dir();
    std::fs::write(d.path().join("empty.recipe.json"), "{\"name\":\"empty\",\"version\":\"1\",\"steps\":[]}").unwrap();
    let o = cli(&[
        "run", "--recipe", &p(&d, "empty.recipe.json"), "--config", &p(&d, "demo.cell.json"),
        "--scene", &p(&d, "demo.scene.json"), "--out", &p(&d, "empty.trace.json"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = ExecutionTrace::from_json(&read(d.path().join("empty.trace.json"))).unwrap();
    let kinds: Vec<_> = trace.events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds, [EventKind::TaskStart, EventKind::TaskEnd]);
}

#[test]
fn plan_run_verify_in_process() {
    let d = demo_dir();
    let args = |v: &[&str]| -> Vec<String> { std::iter::once("skillcell").chain(v.iter().copied()).map(String::from).collect() };
    let recipe = p(&d, "demo.recipe.json");
    assert_eq!(skillcell_cli::run_cli(args(&["plan", "--assembly", &p(&d, "demo.asm.json"), "--plan", &p(&d, "demo.plan.json"), "--out", &recipe])), 0);
    for (trace, seed) in [("t1.trace.json", "3"), ("t2.trace.json", "3")] {
        let code = skillcell_cli::run_cli(args(&[
            "run", "--recipe", &recipe, "--config", &p(&d, "demo.cell.json"), "--scene", &p(&d, "demo.scene.json"),
            "--sigma", "0.0005", "--seed", seed, "--out", &p(&d, trace),
        ]));
        assert_eq!(code, 0);
    }
    assert_eq!(read(d.path().join("t1.trace.json")), read(d.path().join("t2.trace.json")));
    assert_eq!(skillcell_cli::run_cli(args(&["verify-trace", "--trace", &p(&d, "t1.trace.json"), "--recipe", &recipe])), 0);

    // a trace of another recipe does not verify
    std::fs::write(d.path().join("empty.recipe.json"), "{\"name\":\"e\",\"version\":\"1\",\"steps\":[]}").unwrap();
    let code = skillcell_cli::run_cli(args(&["verify-trace", "--trace", &p(&d, "t1.trace.json"), "--recipe", &p(&d, "empty.recipe.json")]));
    assert_eq!(code, skillcell_cli::exit_code("TraceViolation"));
}

#[test]
fn failed_run_writes_no_trace() {
    let d = demo_dir();
    let o = cli(&["plan", "--assembly", &p(&d, "demo.asm.json"), "--plan", &p(&d, "demo.plan.json"), "--out", &p(&d, "demo.recipe.json")]);
    assert!(o.status.success());
    let mut recipe = parse_recipe(&read(d.path().join("demo.recipe.json"))).unwrap();
    let poses = recipe.steps[1].poses.as_mut().unwrap();
    poses.approach.transform = RigidTransform::from_translation(0.0, 0.0, 9.0);
    std::fs::write(d.path().join("far.recipe.json"), skillcell_core::planner::serialize_recipe(&recipe)).unwrap();
    let o = cli(&[
        "run", "--recipe", &p(&d, "far.recipe.json"), "--config", &p(&d, "demo.cell.json"),
        "--scene", &p(&d, "demo.scene.json"), "--out", &p(&d, "far.trace.json"),
    ]);
    assert_category(&o, "CellError");
    assert!(stderr(&o).contains("unreachable_pose"));
    assert!(!d.path().join("far.trace.json").exists());
}

#[test]
fn input_errors_have_their_own_categories() {
    let d = demo_dir();
    let o = cli(&["plan", "--assembly", &p(&d, "missing.asm.json"), "--plan", &p(&d, "demo.plan.json"), "--out", &p(&d, "x.json")]);
    assert_category(&o, "IoError");
    std::fs::write(d.path().join("bad.asm.json"), "{\"assembly\": \"a\", \"parts\": 3}").unwrap();
    let o = cli(&["extract", "--assembly", &p(&d, "bad.asm.json"), "--out", &p(&d, "x.json")]);
    assert_category(&o, "ParseError");
    assert!(stderr(&o).contains("parts"));
    std::fs::write(d.path().join("v2.recipe.json"), "{\"name\":\"e\",\"version\":\"2\",\"steps\":[]}").unwrap();
    let o = cli(&["run", "--recipe", &p(&d, "v2.recipe.json"), "--config", &p(&d, "demo.cell.json"), "--scene", &p(&d, "demo.scene.json"), "--out", &p(&d, "x.json")]);
    assert_category(&o, "VersionMismatch");
    let o = cli(&["plan", "--frobnicate"]);
    assert_category(&o, "UsageError");
    let o = cli(&["run", "--recipe", "r", "--config", "c", "--scene", "s", "--endpoint", "e", "--out", "o"]);
    assert_category(&o, "UsageError");
    assert!(!d.path().join("x.json").exists());
}

#[test]
fn help_documents_file_conventions() {
    let o = cli(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for ext in [".asm.json", ".plan.json", ".recipe.json", ".loc.json", ".cell.json", ".scene.json", ".pairs.json", ".taught.json", ".trace.json"] {
        assert!(text.contains(ext), "{ext} missing from help");
    }
}

#[test]
fn calibrate_then_teach_then_run() {
    let d = demo_dir();
    let config = demo::cell_config();
    let g = config.t_robot_tracker;
    let robot: Vec<Point3> = [(0.1, 0.2, 0.3), (0.5, -0.2, 0.1), (-0.3, 0.4, 0.6), (0.2, 0.2, -0.4)]
        .iter()
        .map(|&(x, y, z)| Point3::new(x, y, z))
        .collect();
    let pairs = CalibrationPairs {
        tracker_points: robot.iter().map(|p| g.inverse().transform_point(p)).collect(),
        robot_points: robot,
    };
    std::fs::write(d.path().join("c.pairs.json"), serde_json::to_string(&pairs).unwrap()).unwrap();
    let o = cli(&["calibrate", "--pairs", &p(&d, "c.pairs.json"), "--out", &p(&d, "tracker.xf.json")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let est: RigidTransform = serde_json::from_str(&read(d.path().join("tracker.xf.json"))).unwrap();
    assert!(est.translation_distance_to(&g) < 1e-9 && est.rotation_angle_to(&g) < 1e-9);

    let camera_from_block = config.world_from_camera().inverse().compose(&demo::block_world_pose());
    let path: Vec<Point3> = (0..5).map(|k| Point3::new(-0.04 + 0.02 * k as f64, 0.0, 0.01)).collect();
    let taught = TaughtPointsFile {
        part: demo::block_id(),
        frame: PointsFrame::Tracker,
        points: simulate_tracker(&camera_from_block, &path, &g, &config.t_robot_camera, 0.0, 0),
    };
    std::fs::write(d.path().join("scan.taught.json"), serde_json::to_string(&taught).unwrap()).unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    let recipe = out_dir.path().join("scan.recipe.json").to_string_lossy().into_owned();
    let o = cli(&[
        "teach", "--points", &p(&d, "scan.taught.json"), "--calibration", &p(&d, "tracker.xf.json"),
        "--config", &p(&d, "demo.cell.json"), "--scene", &p(&d, "demo.scene.json"), "--out", &recipe,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = parse_recipe(&read(&recipe)).unwrap();
    let scan = r.steps[0].path.as_ref().unwrap();
    assert_eq!(scan.len(), 5);
    for (pose, want) in scan.iter().zip(&path) {
        assert!((pose.position() - want).norm() < 1e-9);
    }
    let trace = out_dir.path().join("scan.trace.json").to_string_lossy().into_owned();
    let o = cli(&["run", "--recipe", &recipe, "--config", &p(&d, "demo.cell.json"), "--scene", &p(&d, "demo.scene.json"), "--out", &trace]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = ExecutionTrace::from_json(&read(&trace)).unwrap();
    assert_eq!(t.sent_ops(), ["CAPTURE", "MOVE_L", "MOVE_L", "MOVE_L", "MOVE_L", "MOVE_L"]);

    // too few calibration pairs
    std::fs::write(d.path().join("two.pairs.json"), "{\"robot_points\":[[0,0,0],[1,0,0]],\"tracker_points\":[[0,0,0],[1,0,0]]}").unwrap();
    let o = cli(&["calibrate", "--pairs", &p(&d, "two.pairs.json"), "--out", &p(&d, "two.xf.json")]);
    assert_category(&o, "TooFewPoints");
    let _ = Vector3::zeros();
}

#[test]
fn serve_cell_and_run_over_tcp() {
    let d = demo_dir();
    let o = cli(&["plan", "--assembly", &p(&d, "demo.asm.json"), "--plan", &p(&d, "demo.plan.json"), "--out", &p(&d, "demo.recipe.json")]);
    assert!(o.status.success());
    let mut child = Command::new(BIN)
        .args(["serve-cell", "--config", &p(&d, "demo.cell.json"), "--scene", &p(&d, "demo.scene.json"), "--port", "0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("listening line").to_string();
    let o = cli(&[
        "run", "--recipe", &p(&d, "demo.recipe.json"), "--config", &p(&d, "demo.cell.json"),
        "--endpoint", &addr, "--out", &p(&d, "tcp.trace.json"),
    ]);
    child.kill().unwrap();
    let _ = child.wait();
    assert!(o.status.success(), "{}", stderr(&o));
    let o = cli(&["verify-trace", "--trace", &p(&d, "tcp.trace.json"), "--recipe", &p(&d, "demo.recipe.json")]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = cli(&["run", "--recipe", &p(&d, "demo.recipe.json"), "--config", &p(&d, "demo.cell.json"), "--endpoint", "127.0.0.1:1", "--out", &p(&d, "none.trace.json")]);
    assert_category(&o, "ConnectionError");
}

use std::io::Write;
use std::path::Path;

use skillcell_cellsim::{load_scene, serve, CellClient, CellConfig, CellPort, CellSim, PlacedObject};
use skillcell_core::collab::{
    build_scan_task, points_to_object_frame, calibrate_tracker, tool_down, CalibrationPairs, PathSource, PointsFrame,
    ScanOptions, TaughtPath, TaughtPointsFile,
};
use skillcell_core::error::from_json_str;
use skillcell_core::features::build_localization_recipe;
use skillcell_core::geom::RigidTransform;
use skillcell_core::localizer::MatchTolerances;
use skillcell_core::partmodel::{annotate_skills, extract_skills, parse_part_id, AssemblyModel};
use skillcell_core::planner::{
    compile_task, localization_ref, parse_recipe, serialize_recipe, CompilationRules, ControlRecipe, TaskPlan,
};
use skillcell_core::rng::mix_seed;
use skillcell_taskexec::{interpret, verify_trace as check_trace, ExecOptions, ExecutionTrace, LocalizationStore, SkillRegistry};

use crate::error::CliError;
use crate::output::{dir_of, read, Outputs};
use crate::{
    AnnotateArgs, CalibrateArgs, ExtractArgs, LocgenArgs, PlanArgs, RunArgs, ServeArgs, SimArgs, TeachArgs,
    VerifyArgs,
};

type CmdResult = Result<Vec<String>, CliError>;

fn parse_with<T>(path: &Path, f: impl FnOnce(&str) -> skillcell_core::Result<T>) -> Result<T, CliError> {
    f(&read(path)?).map_err(|e| CliError::in_file(path, e))
}

fn load_assembly(path: &Path) -> Result<AssemblyModel, CliError> {
    parse_with(path, AssemblyModel::from_json)
}

fn load_plan(path: &Path) -> Result<TaskPlan, CliError> {
    parse_with(path, TaskPlan::from_json)
}

fn load_recipe(path: &Path) -> Result<ControlRecipe, CliError> {
    parse_with(path, parse_recipe)
}

fn load_transform(path: &Path) -> Result<RigidTransform, CliError> {
    parse_with(path, from_json_str::<RigidTransform>)
}

fn transform_json(t: &RigidTransform) -> String {
    let mut s = serde_json::to_string_pretty(t).expect("transform serializes");
    s.push('\n');
    s
}

fn written(paths: Vec<std::path::PathBuf>) -> Vec<String> {
    paths.iter().map(|p| format!("wrote {}", p.display())).collect()
}

pub fn plan(a: PlanArgs) -> CmdResult {
    let model = load_assembly(&a.assembly)?;
    let plan = load_plan(&a.plan)?;
    let rules = match &a.rules {
        Some(p) => parse_with(p, from_json_str::<CompilationRules>)?,
        None => CompilationRules::default(),
    };
    let (recipe, locs) = compile_task(&model, &plan, &rules)?;
    let dir = dir_of(&a.out);
    let mut out = Outputs::default();
    out.add(&a.out, serialize_recipe(&recipe));
    for l in &locs {
        out.add(dir.join(localization_ref(&l.part)), l.to_json());
    }
    Ok(written(out.commit()?))
}

pub fn annotate(a: AnnotateArgs) -> CmdResult {
    let model = load_assembly(&a.assembly)?;
    let plan = load_plan(&a.plan)?;
    let annotated = annotate_skills(&model, &plan)?;
    let mut out = Outputs::default();
    out.add(&a.out, annotated.to_json());
    Ok(written(out.commit()?))
}

pub fn extract(a: ExtractArgs) -> CmdResult {
    let model = load_assembly(&a.assembly)?;
    let plan = extract_skills(&model)?;
    let mut out = Outputs::default();
    out.add(&a.out, plan.to_json());
    Ok(written(out.commit()?))
}

pub fn locgen(a: LocgenArgs) -> CmdResult {
    let model = load_assembly(&a.assembly)?;
    let part = parse_part_id(&a.part)?;
    let (_, geometry) = model.resolve(&part)?;
    let recipe = build_localization_recipe(geometry, &part, &a.wires, a.spacing)?;
    let mut out = Outputs::default();
    out.add(&a.out, recipe.to_json());
    Ok(written(out.commit()?))
}

fn load_sim_scene(path: &Path, sim: &SimArgs) -> Result<Vec<PlacedObject>, CliError> {
    if let Some(s) = sim.sigma {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(CliError::new("UsageError", format!("--sigma must be >= 0, got {s}")));
        }
    }
    let mut scene = load_scene(path)?;
    for o in &mut scene {
        if let Some(s) = sim.sigma {
            o.scene.noise_sigma = s;
        }
        o.scene.seed = mix_seed(sim.seed, o.scene.seed);
    }
    Ok(scene)
}

fn load_config(path: &Path) -> Result<CellConfig, CliError> {
    Ok(CellConfig::load(path)?)
}

pub fn serve_cell(a: ServeArgs) -> CmdResult {
    let config = load_config(&a.config)?;
    let scene = match &a.scene {
        Some(p) => load_sim_scene(p, &a.sim)?,
        None => Vec::new(),
    };
    let addr = match a.port {
        Some(port) => {
            let host = config.endpoint.rsplit_once(':').map_or("127.0.0.1", |(h, _)| h);
            format!("{host}:{port}")
        }
        None => config.endpoint.clone(),
    };
    let sim = CellSim::new(config, scene, a.sim.seed);
    let handle = serve(sim, addr.as_str())
        .map_err(|e| CliError::new("ConnectionError", format!("cannot bind {addr}: {e}")))?;
    {
        let mut stdout = std::io::stdout().lock();
        let _ = writeln!(stdout, "listening on {}", handle.local_addr());
        let _ = stdout.flush();
    }
    handle.wait();
    Ok(Vec::new())
}

pub fn run(a: RunArgs) -> CmdResult {
    let recipe = load_recipe(&a.recipe)?;
    let config = load_config(&a.config)?;
    let store = LocalizationStore::load_for(&recipe, &dir_of(&a.recipe))?;
    let options = ExecOptions {
        tolerances: MatchTolerances {
            length: a.tol_length,
            distance: a.tol_distance,
        },
        reuse_localization: a.reuse_localization,
    };
    let registry = SkillRegistry::builtin();
    let mut client = None;
    let mut local = None;
    let port: &mut dyn CellPort = match &a.scene {
        Some(scene) => {
            let scene = load_sim_scene(scene, &a.sim)?;
            local.insert(CellSim::new(config.clone(), scene, a.sim.seed))
        }
        None => {
            let endpoint = a.endpoint.clone().unwrap_or_else(|| config.endpoint.clone());
            client.insert(CellClient::connect(endpoint.as_str()).map_err(|e| {
                CliError::new("ConnectionError", format!("{endpoint}: {e}"))
            })?)
        }
    };
    let outcome = interpret(&recipe, &config, port, &store, &registry, &options);
    if let Some(c) = client {
        let _ = c.close();
    }
    if let Some(e) = outcome.error {
        return Err(e.into());
    }
    let mut out = Outputs::default();
    out.add(&a.out, outcome.trace.to_json());
    let mut lines = written(out.commit()?);
    lines.push(format!(
        "{} step(s), {} primitive(s)",
        recipe.steps.len(),
        outcome.trace.sent_ops().len()
    ));
    Ok(lines)
}

pub fn calibrate(a: CalibrateArgs) -> CmdResult {
    let pairs = parse_with(&a.pairs, CalibrationPairs::from_json)?;
    let t = calibrate_tracker(&pairs)?;
    let mut out = Outputs::default();
    out.add(&a.out, transform_json(&t));
    Ok(written(out.commit()?))
}

pub fn teach(a: TeachArgs) -> CmdResult {
    let taught = parse_with(&a.points, TaughtPointsFile::from_json)?;
    let config = load_config(&a.config)?;
    let scene = load_scene(&a.scene)?;
    let placed = scene
        .iter()
        .find(|o| o.scene.part == taught.part)
        .ok_or_else(|| CliError::new("UnknownPart", format!("{} is not in the scene", taught.part)))?;
    let localization = match &a.localization {
        Some(p) => parse_with(p, skillcell_core::features::LocalizationRecipe::from_json)?,
        None => placed.recipe.clone(),
    };
    let (points, source) = match taught.frame {
        PointsFrame::Object => (taught.points.clone(), PathSource::File),
        PointsFrame::Tracker => {
            let t_robot_tracker = match &a.calibration {
                Some(p) => load_transform(p)?,
                None => config.t_robot_tracker,
            };
            let pts = points_to_object_frame(
                &taught.points,
                &t_robot_tracker,
                &config.t_robot_camera,
                &placed.scene.true_pose,
            );
            (pts, PathSource::Tracker)
        }
    };
    let options = ScanOptions {
        orientation: match &a.orientation {
            Some(p) => load_transform(p)?,
            None => tool_down(),
        },
        speed: a.speed,
        name: a.name.clone(),
    };
    let path = TaughtPath {
        part: taught.part.clone(),
        points,
        source,
    };
    let (plan, recipe) = build_scan_task(&path, &localization, &options)?;
    let mut out = Outputs::default();
    out.add(&a.out, serialize_recipe(&recipe));
    out.add(dir_of(&a.out).join(localization_ref(&path.part)), localization.to_json());
    if let Some(p) = &a.plan_out {
        out.add(p, plan.to_json());
    }
    Ok(written(out.commit()?))
}

pub fn verify_trace(a: VerifyArgs) -> CmdResult {
    let trace = parse_with(&a.trace, ExecutionTrace::from_json)?;
    let recipe = load_recipe(&a.recipe)?;
    let violations = check_trace(&trace, &recipe);
    if violations.is_empty() {
        Ok(vec![format!("ok: {} event(s) consistent with {}", trace.events.len(), recipe.name)])
    } else {
        Err(CliError::new(
            "TraceViolation",
            format!("{} violation(s): {}", violations.len(), violations.join("; ")),
        ))
    }
}

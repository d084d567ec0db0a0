//! Reference cell used by the examples and tests: a base plate with a seat
//! and a block that is picked up and placed on the seat.
//!
//! Every wire in the cell has a distinct length, so features of different
//! parts never compete during matching.

use skillcell_core::features::LocalizationRecipe;
use skillcell_core::geom::{Point3, RigidTransform, Vector3};
use skillcell_core::localizer::SceneObject;
use skillcell_core::partmodel::{AssemblyModel, Instance, PartGeometry, PartId, Wire};
use skillcell_core::planner::{localization_ref, compile_task, CompilationRules, PlanStep, StepParams, SkillKind, TaskPlan};

use crate::config::{CellConfig, PlacedObject};

pub const ASSEMBLY: &str = "demo";
/// Height of the block above the seat after placing.
pub const SEAT_LIFT: f64 = 0.02;

fn add_square_wire(g: &mut PartGeometry, name: &str, cx: f64, cy: f64, half: f64) {
    let base = g.vertices.len();
    for (dx, dy) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
        g.vertices.push(Point3::new(cx + dx * half, cy + dy * half, 0.0));
    }
    let e0 = g.edges.len();
    for i in 0..4 {
        g.edges.push(vec![base + i, base + (i + 1) % 4]);
    }
    g.wires.push(Wire {
        name: name.to_string(),
        edges: (e0..e0 + 4).collect(),
        closed: true,
    });
}

/// Part with a square of grip vertices 0..4 centred on its origin, ordered
/// so that the grip pose is the part frame itself.
fn part_with_grip(name: &str, half: f64) -> PartGeometry {
    let vertices = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
        .iter()
        .map(|(x, y)| Point3::new(x * half, y * half, 0.0))
        .collect();
    PartGeometry {
        name: name.to_string(),
        vertices,
        edges: vec![vec![0, 1, 2, 3, 0]],
        wires: Vec::new(),
    }
}

pub fn base_part() -> PartGeometry {
    let mut g = part_with_grip("base", 0.03);
    add_square_wire(&mut g, "h0", -0.12, -0.08, 0.017);
    add_square_wire(&mut g, "h1", 0.12, -0.08, 0.020);
    add_square_wire(&mut g, "h2", 0.12, 0.08, 0.023);
    add_square_wire(&mut g, "h3", -0.12, 0.08, 0.026);
    g
}

pub fn block_part() -> PartGeometry {
    let mut g = part_with_grip("block", 0.05);
    add_square_wire(&mut g, "b0", -0.04, -0.03, 0.008);
    add_square_wire(&mut g, "b1", 0.04, -0.03, 0.011);
    add_square_wire(&mut g, "b2", 0.0, 0.04, 0.014);
    g
}

pub fn base_wires() -> Vec<String> {
    ["h0", "h1", "h2", "h3"].map(String::from).to_vec()
}

pub fn block_wires() -> Vec<String> {
    ["b0", "b1", "b2"].map(String::from).to_vec()
}

pub fn base_id() -> PartId {
    PartId::new("base", "base1", ASSEMBLY).expect("valid id")
}

pub fn block_id() -> PartId {
    PartId::new("block", "block1", ASSEMBLY).expect("valid id")
}

fn seat_offset() -> RigidTransform {
    RigidTransform::from_translation(0.0, 0.0, SEAT_LIFT)
}

/// Assembled state: the block sits on the seat of the base.
pub fn assembly() -> AssemblyModel {
    AssemblyModel {
        assembly_name: ASSEMBLY.to_string(),
        parts: vec![base_part(), block_part()],
        instances: vec![
            Instance {
                instance_name: "base1".into(),
                part_name: "base".into(),
                placement: RigidTransform::identity(),
            },
            Instance {
                instance_name: "block1".into(),
                part_name: "block".into(),
                placement: seat_offset(),
            },
        ],
        annotations: Vec::new(),
    }
}

/// Localize the base, pick the block, place it on the seat.
pub fn plan() -> TaskPlan {
    let grip = Some([0, 1, 2, 3]);
    TaskPlan {
        name: "demo_assembly".into(),
        steps: vec![
            PlanStep {
                order: 1,
                skill: SkillKind::LocalizeObject,
                targets: vec![base_id()],
                params: StepParams {
                    wires: base_wires(),
                    ..StepParams::default()
                },
            },
            PlanStep {
                order: 2,
                skill: SkillKind::PickLocalized,
                targets: vec![block_id()],
                params: StepParams {
                    vertices: grip,
                    wires: block_wires(),
                    ..StepParams::default()
                },
            },
            PlanStep {
                order: 3,
                skill: SkillKind::PlaceLocalized,
                targets: vec![block_id(), base_id()],
                params: StepParams {
                    vertices: grip,
                    offset: Some(seat_offset()),
                    wires: base_wires(),
                    ..StepParams::default()
                },
            },
        ],
    }
}

pub fn cell_config() -> CellConfig {
    CellConfig {
        name: "democell".into(),
        t_robot_camera: RigidTransform::from_translation(0.6, 0.0, 1.0)
            .compose(&RigidTransform::from_axis_angle(Vector3::x(), std::f64::consts::PI)),
        t_robot_tracker: RigidTransform::from_translation(-0.5, 1.0, 0.2)
            .compose(&RigidTransform::from_axis_angle(Vector3::z(), std::f64::consts::FRAC_PI_2)),
        home: RigidTransform::from_translation(0.3, 0.0, 0.5),
        ..CellConfig::default()
    }
}

fn on_table(x: f64, y: f64, yaw_deg: f64) -> RigidTransform {
    RigidTransform::from_translation(x, y, 0.0)
        .compose(&RigidTransform::from_axis_angle(Vector3::z(), yaw_deg.to_radians()))
}

/// World ← base before the task runs.
pub fn base_world_pose() -> RigidTransform {
    on_table(0.6, 0.2, 20.0)
}

/// World ← block before the task runs.
pub fn block_world_pose() -> RigidTransform {
    on_table(0.5, -0.25, -35.0)
}

pub fn localization_recipes() -> Vec<LocalizationRecipe> {
    let (_, recipes) = compile_task(&assembly(), &plan(), &CompilationRules::default())
        .expect("demo plan compiles");
    recipes
}

/// Scene objects for parts at the given world poses.
pub fn scene(
    config: &CellConfig,
    world_poses: &[(PartId, RigidTransform)],
    noise_sigma: f64,
    seed: u64,
) -> Vec<SceneObject> {
    let camera_from_world = config.world_from_camera().inverse();
    world_poses
        .iter()
        .enumerate()
        .map(|(i, (part, pose))| SceneObject {
            part: part.clone(),
            true_pose: camera_from_world.compose(pose),
            noise_sigma,
            seed: seed.wrapping_add(i as u64),
            localization_recipe: localization_ref(part),
        })
        .collect()
}

pub fn default_scene(config: &CellConfig, noise_sigma: f64, seed: u64) -> Vec<SceneObject> {
    scene(
        config,
        &[(base_id(), base_world_pose()), (block_id(), block_world_pose())],
        noise_sigma,
        seed,
    )
}

/// Attach the matching localization recipes to scene objects.
pub fn place(scene: Vec<SceneObject>, recipes: &[LocalizationRecipe]) -> Vec<PlacedObject> {
    scene
        .into_iter()
        .map(|scene| {
            let recipe = recipes
                .iter()
                .find(|r| r.part == scene.part)
                .unwrap_or_else(|| panic!("no localization recipe for {}", scene.part))
                .clone();
            PlacedObject { scene, recipe }
        })
        .collect()
}

pub fn default_placed_scene(noise_sigma: f64, seed: u64) -> Vec<PlacedObject> {
    place(
        default_scene(&cell_config(), noise_sigma, seed),
        &localization_recipes(),
    )
}

/// The demo cell as named files: assembly, task plan, cell configuration,
/// scene and the localization recipes the scene refers to.
pub fn files() -> Vec<(String, String)> {
    let config = cell_config();
    let scene = default_scene(&config, 0.0, 0);
    let mut scene_json = serde_json::to_string_pretty(&scene).expect("scene serializes");
    scene_json.push('\n');
    let mut out = vec![
        ("demo.asm.json".to_string(), assembly().to_json()),
        ("demo.plan.json".to_string(), plan().to_json()),
        ("demo.cell.json".to_string(), config.to_json()),
        ("demo.scene.json".to_string(), scene_json),
    ];
    for r in localization_recipes() {
        out.push((localization_ref(&r.part), r.to_json()));
    }
    out
}

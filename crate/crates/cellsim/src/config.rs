use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skillcell_core::error::from_json_str;
use skillcell_core::features::LocalizationRecipe;
use skillcell_core::geom::RigidTransform;
use skillcell_core::localizer::{parse_scene, SceneObject};
use thiserror::Error;

pub const DEFAULT_GRASP_TOLERANCE: f64 = 0.02;
pub const DEFAULT_WORKSPACE_HALF_EXTENT: f64 = 2.0;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Core {
        path: PathBuf,
        #[source]
        source: skillcell_core::Error,
    },
}

impl LoadError {
    pub fn category(&self) -> &'static str {
        match self {
            LoadError::Io { .. } => "IoError",
            LoadError::Core { source, .. } => source.category(),
        }
    }
}

pub(crate) fn read(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn default_grasp_tolerance() -> f64 {
    DEFAULT_GRASP_TOLERANCE
}

fn default_half_extent() -> f64 {
    DEFAULT_WORKSPACE_HALF_EXTENT
}

fn default_name() -> String {
    "simcell".into()
}

/// Static description of the work cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// World ← robot base.
    pub robot_base: RigidTransform,
    /// Flange ← tool tip.
    pub tool: RigidTransform,
    #[serde(rename = "T_robot_camera")]
    pub t_robot_camera: RigidTransform,
    #[serde(rename = "T_robot_tracker")]
    pub t_robot_tracker: RigidTransform,
    pub default_speed: f64,
    pub endpoint: String,
    #[serde(default = "default_grasp_tolerance")]
    pub grasp_tolerance: f64,
    /// Reachable tool positions: a cube of this half extent around the robot base.
    #[serde(default = "default_half_extent")]
    pub workspace_half_extent: f64,
    /// Initial tool pose, world frame.
    #[serde(default)]
    pub home: RigidTransform,
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig {
            name: default_name(),
            robot_base: RigidTransform::identity(),
            tool: RigidTransform::identity(),
            t_robot_camera: RigidTransform::identity(),
            t_robot_tracker: RigidTransform::identity(),
            default_speed: 0.25,
            endpoint: "127.0.0.1:7878".into(),
            grasp_tolerance: DEFAULT_GRASP_TOLERANCE,
            workspace_half_extent: DEFAULT_WORKSPACE_HALF_EXTENT,
            home: RigidTransform::identity(),
        }
    }
}

impl CellConfig {
    pub fn from_json(text: &str) -> skillcell_core::Result<Self> {
        let cfg: CellConfig = from_json_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        CellConfig::from_json(&read(path)?).map_err(|source| LoadError::Core {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn validate(&self) -> skillcell_core::Result<()> {
        let bad = |m: &str| skillcell_core::Error::InvalidModel(format!("cell config: {m}"));
        if !(self.default_speed > 0.0 && self.default_speed.is_finite()) {
            return Err(bad("default_speed must be positive"));
        }
        if !(self.grasp_tolerance >= 0.0) {
            return Err(bad("grasp_tolerance must be >= 0"));
        }
        if !(self.workspace_half_extent > 0.0) {
            return Err(bad("workspace_half_extent must be positive"));
        }
        Ok(())
    }

    /// World ← camera.
    pub fn world_from_camera(&self) -> RigidTransform {
        self.robot_base.compose(&self.t_robot_camera)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// A scene object together with its localization recipe.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacedObject {
    pub scene: SceneObject,
    pub recipe: LocalizationRecipe,
}

/// Load a scene file and the localization recipes it references (paths
/// relative to the scene file).
pub fn load_scene(path: &Path) -> Result<Vec<PlacedObject>, LoadError> {
    let core = |p: &Path| {
        let p = p.to_path_buf();
        move |source| LoadError::Core { path: p, source }
    };
    let objects = parse_scene(&read(path)?).map_err(core(path))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut cache: BTreeMap<String, LocalizationRecipe> = BTreeMap::new();
    let mut out = Vec::with_capacity(objects.len());
    for scene in objects {
        let recipe = match cache.get(&scene.localization_recipe) {
            Some(r) => r.clone(),
            None => {
                let rp = dir.join(&scene.localization_recipe);
                let r = LocalizationRecipe::from_json(&read(&rp)?).map_err(core(&rp))?;
                cache.insert(scene.localization_recipe.clone(), r.clone());
                r
            }
        };
        out.push(PlacedObject { scene, recipe });
    }
    Ok(out)
}

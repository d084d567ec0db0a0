//! Simulated 3D localization: noisy feature observations of placed parts,
//! descriptor matching by backtracking search, and rigid pose estimation.
//!
//! The simulated camera reports, per recipe feature, the principal point in
//! the camera frame plus Gaussian noise and the exact cumulative length. The
//! generator is `ChaCha8Rng::seed_from_u64(seed)`; noise is drawn per feature
//! in recipe order (x, y, z), then the observation list is shuffled with the
//! same generator and ids `o0..oN` are assigned in shuffled order.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{from_json_str, Error, Result};
use crate::features::{FeatureType, LocalizationRecipe};
use crate::geom::{point_serde, umeyama_rigid, Point3, RigidTransform};
use crate::partmodel::PartId;
use crate::rng::{gaussian_vector, seeded};

pub const DEFAULT_TOL_LEN: f64 = 0.005;
pub const DEFAULT_TOL_DIST: f64 = 0.005;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureObservation {
    pub observed_id: String,
    pub feature_type: FeatureType,
    /// Camera frame.
    #[serde(with = "point_serde")]
    pub principal_point: Point3,
    pub cumulative_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub part: PartId,
    /// Camera frame ← part frame.
    pub true_pose: RigidTransform,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Localization recipe file, relative to the scene file.
    pub localization_recipe: String,
}

impl SceneObject {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidModel(format!(
                "scene object {}: noise sigma must be >= 0",
                self.part
            )));
        }
        Ok(())
    }
}

pub fn parse_scene(text: &str) -> Result<Vec<SceneObject>> {
    let objects: Vec<SceneObject> = from_json_str(text)?;
    for o in &objects {
        o.validate()?;
    }
    Ok(objects)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchTolerances {
    pub length: f64,
    pub distance: f64,
}

impl Default for MatchTolerances {
    fn default() -> Self {
        MatchTolerances {
            length: DEFAULT_TOL_LEN,
            distance: DEFAULT_TOL_DIST,
        }
    }
}

/// Observations of one recipe placed at `pose` (camera ← part).
pub fn observe(
    recipe: &LocalizationRecipe,
    pose: &RigidTransform,
    sigma: f64,
    seed: u64,
) -> Vec<FeatureObservation> {
    let mut rng = seeded(seed);
    let mut obs: Vec<FeatureObservation> = recipe
        .features
        .iter()
        .map(|f| {
            let p = pose.transform_point(&f.principal_point);
            let noise = gaussian_vector(&mut rng, sigma);
            FeatureObservation {
                observed_id: String::new(),
                feature_type: f.feature_type,
                principal_point: if sigma > 0.0 { p + noise } else { p },
                cumulative_length: f.cumulative_length,
            }
        })
        .collect();
    obs.shuffle(&mut rng);
    for (k, o) in obs.iter_mut().enumerate() {
        o.observed_id = format!("o{k}");
    }
    obs
}

pub fn simulate_scene(recipe: &LocalizationRecipe, obj: &SceneObject) -> Vec<FeatureObservation> {
    observe(recipe, &obj.true_pose, obj.noise_sigma, obj.seed)
}

struct Search<'a> {
    recipe: &'a LocalizationRecipe,
    obs: &'a [FeatureObservation],
    candidates: Vec<Vec<usize>>,
    tol_dist: f64,
    current: Vec<Option<usize>>,
    used: Vec<bool>,
    best_size: usize,
    best: Vec<Vec<Option<usize>>>,
}

impl Search<'_> {
    fn consistent(&self, feature: usize, ob: usize) -> bool {
        let fid = &self.recipe.features[feature].feature_id;
        self.current[..feature].iter().enumerate().all(|(g, assigned)| match assigned {
            None => true,
            Some(oj) => {
                let gid = &self.recipe.features[g].feature_id;
                let expected = match self.recipe.distance(fid, gid) {
                    Some(d) => d,
                    None => (self.recipe.features[feature].principal_point
                        - self.recipe.features[g].principal_point)
                        .norm(),
                };
                let seen = (self.obs[ob].principal_point - self.obs[*oj].principal_point).norm();
                (seen - expected).abs() <= self.tol_dist
            }
        })
    }

    fn run(&mut self, feature: usize, size: usize) {
        let n = self.recipe.features.len();
        if size + (n - feature) < self.best_size {
            return;
        }
        if feature == n {
            if size > self.best_size {
                self.best_size = size;
                self.best.clear();
            }
            if size == self.best_size && self.best.len() < 2 {
                self.best.push(self.current.clone());
            }
            return;
        }
        for k in 0..self.candidates[feature].len() {
            let ob = self.candidates[feature][k];
            if self.used[ob] || !self.consistent(feature, ob) {
                continue;
            }
            self.used[ob] = true;
            self.current[feature] = Some(ob);
            self.run(feature + 1, size + 1);
            self.current[feature] = None;
            self.used[ob] = false;
        }
        self.run(feature + 1, size);
    }
}

/// Assign observations to recipe features so that lengths and all pairwise
/// principal-point distances agree within tolerance.
///
/// Returns `(feature_id, observed_id)` pairs in recipe order. The largest
/// consistent assignment must cover at least three features and be unique.
pub fn match_features(
    observations: &[FeatureObservation],
    recipe: &LocalizationRecipe,
    tol: MatchTolerances,
) -> Result<Vec<(String, String)>> {
    if observations.len() < 3 || recipe.features.len() < 3 {
        return Err(Error::NoConsistentMatch);
    }
    let candidates = recipe
        .features
        .iter()
        .map(|f| {
            observations
                .iter()
                .enumerate()
                .filter(|(_, o)| {
                    o.feature_type == f.feature_type
                        && (o.cumulative_length - f.cumulative_length).abs() <= tol.length
                })
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let mut search = Search {
        recipe,
        obs: observations,
        candidates,
        tol_dist: tol.distance,
        current: vec![None; recipe.features.len()],
        used: vec![false; observations.len()],
        best_size: 3,
        best: Vec::new(),
    };
    search.run(0, 0);
    match search.best.as_slice() {
        [] => Err(Error::NoConsistentMatch),
        [one] => Ok(one
            .iter()
            .enumerate()
            .filter_map(|(f, o)| {
                o.map(|o| {
                    (
                        recipe.features[f].feature_id.clone(),
                        observations[o].observed_id.clone(),
                    )
                })
            })
            .collect()),
        _ => Err(Error::AmbiguousMatch(format!(
            "{} has several consistent {}-feature assignments",
            recipe.part, search.best_size
        ))),
    }
}

/// Rigid pose (camera ← part) from matched principal points.
pub fn estimate_object_pose(
    matches: &[(String, String)],
    observations: &[FeatureObservation],
    recipe: &LocalizationRecipe,
) -> Result<RigidTransform> {
    if matches.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: matches.len(),
        });
    }
    let mut source = Vec::with_capacity(matches.len());
    let mut target = Vec::with_capacity(matches.len());
    for (fid, oid) in matches {
        let f = recipe
            .feature(fid)
            .ok_or_else(|| Error::InvalidRecipe(format!("unknown feature {fid}")))?;
        let o = observations
            .iter()
            .find(|o| &o.observed_id == oid)
            .ok_or_else(|| Error::InvalidRecipe(format!("unknown observation {oid}")))?;
        source.push(f.principal_point);
        target.push(o.principal_point);
    }
    umeyama_rigid(&source, &target)
}

/// Match then estimate.
pub fn localize(
    observations: &[FeatureObservation],
    recipe: &LocalizationRecipe,
    tol: MatchTolerances,
) -> Result<RigidTransform> {
    let matches = match_features(observations, recipe, tol)?;
    estimate_object_pose(&matches, observations, recipe)
}

//! Wire sampling, PCA feature frames and localization recipes.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{from_json_str, Error, Result};
use crate::geom::{point_serde, principal_axes, Point3, RigidTransform};
use crate::partmodel::{PartGeometry, PartId};

pub const DEFAULT_SPACING: f64 = 0.001;
pub const MIN_SAMPLES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureType {
    Curve3d,
    SphericalSegment,
    ConicalSegment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDescriptor {
    pub feature_id: String,
    pub feature_type: FeatureType,
    /// Centroid of the sampled points, part frame.
    #[serde(with = "point_serde")]
    pub principal_point: Point3,
    pub cumulative_length: f64,
    /// Part frame ← feature frame (origin at the principal point).
    pub local_frame: RigidTransform,
    #[serde(with = "point_serde::vec")]
    pub reference_points: Vec<Point3>,
    #[serde(default)]
    pub distances_to_others: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationRecipe {
    pub part: PartId,
    pub sampling_spacing: f64,
    pub features: Vec<FeatureDescriptor>,
}

impl LocalizationRecipe {
    pub fn from_json(text: &str) -> Result<Self> {
        let recipe: LocalizationRecipe = from_json_str(text)?;
        recipe.validate()?;
        Ok(recipe)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("recipe serializes");
        s.push('\n');
        s
    }

    pub fn feature(&self, id: &str) -> Option<&FeatureDescriptor> {
        self.features.iter().find(|f| f.feature_id == id)
    }

    /// Recipe distance between two features' principal points.
    pub fn distance(&self, a: &str, b: &str) -> Option<f64> {
        self.feature(a)?.distances_to_others.get(b).copied()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Error::InvalidRecipe(format!("localization recipe {}: {m}", self.part));
        if self.features.len() < 3 {
            return Err(Error::InsufficientFeatures { got: self.features.len() });
        }
        if !(self.sampling_spacing > 0.0) {
            return Err(bad("sampling spacing must be positive".into()));
        }
        let mut ids = HashSet::new();
        for f in &self.features {
            if !ids.insert(f.feature_id.as_str()) {
                return Err(bad(format!("duplicate feature id {}", f.feature_id)));
            }
            if f.feature_type == FeatureType::Curve3d && !(f.cumulative_length > 0.0) {
                return Err(bad(format!("feature {} has non-positive length", f.feature_id)));
            }
            if !(2..=4).contains(&f.reference_points.len()) {
                return Err(bad(format!("feature {} needs 2-4 reference points", f.feature_id)));
            }
        }
        for a in &self.features {
            if a.distances_to_others.len() != self.features.len() - 1 {
                return Err(bad(format!("feature {} distance map incomplete", a.feature_id)));
            }
            for (other, d) in &a.distances_to_others {
                let back = self
                    .distance(other, &a.feature_id)
                    .ok_or_else(|| bad(format!("feature {} lists unknown feature {other}", a.feature_id)))?;
                if (back - d).abs() > 1e-9 {
                    return Err(bad(format!("distance {}-{other} is not symmetric", a.feature_id)));
                }
            }
        }
        Ok(())
    }
}

/// Ordered wire polyline points, with the total arc length.
fn wire_polyline(geometry: &PartGeometry, wire_name: &str) -> Result<(Vec<Point3>, bool, f64)> {
    let (chain, closed) = geometry.wire_chain(wire_name)?;
    let pts: Vec<Point3> = chain.iter().map(|&i| geometry.vertices[i]).collect();
    let length = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    Ok((pts, closed, length))
}

/// Exact arc length of a wire.
pub fn wire_length(geometry: &PartGeometry, wire_name: &str) -> Result<f64> {
    Ok(wire_polyline(geometry, wire_name)?.2)
}

/// Sample a wire at uniform arc-length stations.
///
/// `N = max(8, ceil(L / spacing))` intervals of length `L / N`. Closed wires
/// yield N points (the start point once); open wires yield N + 1 points
/// including both ends.
pub fn sample_wire(geometry: &PartGeometry, wire_name: &str, spacing: f64) -> Result<Vec<Point3>> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::DegenerateGeometry(format!("sampling spacing {spacing} must be positive")));
    }
    let (pts, closed, length) = wire_polyline(geometry, wire_name)?;
    if !(length > 0.0) {
        return Err(Error::ZeroLength(wire_name.to_string()));
    }
    let mut cumulative = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in pts.windows(2) {
        acc += (w[1] - w[0]).norm();
        cumulative.push(acc);
    }
    // guard against ceil() stepping up on a ratio like 8.000000000000002
    let ratio = length / spacing;
    let n = MIN_SAMPLES.max((ratio * (1.0 - 1e-12)).ceil() as usize);
    let step = length / n as f64;
    let count = if closed { n } else { n + 1 };
    let segments = pts.len() - 1;
    let out = (0..count)
        .map(|k| {
            if !closed && k == n {
                return pts[segments];
            }
            let s = k as f64 * step;
            let i = cumulative.partition_point(|&c| c <= s).saturating_sub(1).min(segments - 1);
            let seg_len = cumulative[i + 1] - cumulative[i];
            if seg_len == 0.0 {
                return pts[i];
            }
            let t = ((s - cumulative[i]) / seg_len).clamp(0.0, 1.0);
            pts[i] + (pts[i + 1] - pts[i]) * t
        })
        .collect();
    Ok(out)
}

/// Local frame of a point set: origin at the centroid, x along the
/// largest-variance axis, z along the smallest, y = z × x.
pub fn feature_frame(points: &[Point3]) -> Result<RigidTransform> {
    let axes = principal_axes(points)?;
    let x = axes.eigenvectors[0];
    let z = axes.eigenvectors[2];
    let y = z.cross(&x);
    let rot = nalgebra::Matrix3::from_columns(&[x, y, z]);
    Ok(RigidTransform::from_matrix(&rot, axes.centroid.coords))
}

fn reference_points(samples: &[Point3], frame: &RigidTransform) -> Vec<Point3> {
    let c = frame.position();
    let (x, y) = (frame.axis(0), frame.axis(1));
    let extreme = |axis: &crate::geom::Vector3, max: bool| {
        let mut best = 0;
        let mut best_v = (samples[0] - c).dot(axis);
        for (i, p) in samples.iter().enumerate().skip(1) {
            let v = (p - c).dot(axis);
            if (max && v > best_v) || (!max && v < best_v) {
                best = i;
                best_v = v;
            }
        }
        best
    };
    let mut idx = Vec::with_capacity(4);
    for i in [extreme(&x, true), extreme(&x, false), extreme(&y, true), extreme(&y, false)] {
        if !idx.contains(&i) {
            idx.push(i);
        }
    }
    idx.truncate(4);
    idx.into_iter().map(|i| samples[i]).collect()
}

pub fn build_feature(
    geometry: &PartGeometry,
    wire_name: &str,
    spacing: f64,
    feature_id: &str,
) -> Result<FeatureDescriptor> {
    let samples = sample_wire(geometry, wire_name, spacing)?;
    let length = wire_length(geometry, wire_name)?;
    let frame = feature_frame(&samples)?;
    let mut refs = reference_points(&samples, &frame);
    if refs.len() < 2 {
        return Err(Error::DegenerateGeometry(format!("wire {wire_name} has no spread")));
    }
    refs.truncate(4);
    Ok(FeatureDescriptor {
        feature_id: feature_id.to_string(),
        feature_type: FeatureType::Curve3d,
        principal_point: frame.position(),
        cumulative_length: length,
        local_frame: frame,
        reference_points: refs,
        distances_to_others: BTreeMap::new(),
    })
}

/// Build one feature per wire (ids are the wire names) and fill the
/// pairwise principal-point distance maps.
pub fn build_localization_recipe(
    geometry: &PartGeometry,
    part: &PartId,
    wire_names: &[String],
    spacing: f64,
) -> Result<LocalizationRecipe> {
    if wire_names.len() < 3 {
        return Err(Error::InsufficientFeatures { got: wire_names.len() });
    }
    let mut seen = HashSet::new();
    if let Some(dup) = wire_names.iter().find(|w| !seen.insert(w.as_str())) {
        return Err(Error::InvalidPlan(format!("wire {dup} listed twice")));
    }
    let mut features = wire_names
        .iter()
        .map(|w| build_feature(geometry, w, spacing, w))
        .collect::<Result<Vec<_>>>()?;
    let centers: Vec<Point3> = features.iter().map(|f| f.principal_point).collect();
    if principal_axes(&centers)?.is_collinear() {
        return Err(Error::DegenerateGeometry(format!(
            "principal points of {} are collinear",
            part
        )));
    }
    for i in 0..features.len() {
        for j in (i + 1)..features.len() {
            let d = (centers[i] - centers[j]).norm();
            let (id_i, id_j) = (features[i].feature_id.clone(), features[j].feature_id.clone());
            features[i].distances_to_others.insert(id_j, d);
            features[j].distances_to_others.insert(id_i, d);
        }
    }
    Ok(LocalizationRecipe {
        part: part.clone(),
        sampling_spacing: spacing,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vector3;
    use crate::partmodel::Wire;
    use crate::rng::{random_rigid, seeded};
    use std::f64::consts::TAU;

    fn polygon_part(name: &str, pts: Vec<Point3>, closed: bool) -> PartGeometry {
        let n = pts.len();
        let edges: Vec<Vec<usize>> = if closed {
            (0..n).map(|i| vec![i, (i + 1) % n]).collect()
        } else {
            (0..n - 1).map(|i| vec![i, i + 1]).collect()
        };
        PartGeometry {
            name: name.into(),
            vertices: pts,
            wires: vec![Wire {
                name: "w".into(),
                edges: (0..edges.len()).collect(),
                closed,
            }],
            edges,
        }
    }

    fn unit_square() -> PartGeometry {
        polygon_part(
            "sq",
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            true,
        )
    }

    fn circle(radius: f64, n: usize, center: Point3) -> Vec<Point3> {
        (0..n)
            .map(|k| {
                let a = TAU * k as f64 / n as f64;
                center + Vector3::new(radius * a.cos(), radius * a.sin(), 0.0)
            })
            .collect()
    }

    /// Three square holes of different sizes in one plate.
    pub(crate) fn three_hole_plate() -> PartGeometry {
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        let mut wires = Vec::new();
        for (k, (cx, cy, half)) in [(0.0, 0.0, 0.01), (0.2, 0.0, 0.015), (0.05, 0.15, 0.02)].into_iter().enumerate() {
            let base = vertices.len();
            for (dx, dy) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                vertices.push(Point3::new(cx + dx * half, cy + dy * half, 0.0));
            }
            let e0 = edges.len();
            for i in 0..4 {
                edges.push(vec![base + i, base + (i + 1) % 4]);
            }
            wires.push(Wire {
                name: format!("hole{k}"),
                edges: (e0..e0 + 4).collect(),
                closed: true,
            });
        }
        PartGeometry {
            name: "plate".into(),
            vertices,
            edges,
            wires,
        }
    }

    #[test]
    fn sample_closed_square() {
        let pts = sample_wire(&unit_square(), "w", 0.5).unwrap();
        let expected = [
            (0.0, 0.0),
            (0.5, 0.0),
            (1.0, 0.0),
            (1.0, 0.5),
            (1.0, 1.0),
            (0.5, 1.0),
            (0.0, 1.0),
            (0.0, 0.5),
        ];
        assert_eq!(pts.len(), 8);
        for (p, (x, y)) in pts.iter().zip(expected) {
            assert!((p - Point3::new(x, y, 0.0)).norm() < 1e-15, "{p}");
        }
    }

    #[test]
    fn sample_open_segment() {
        let part = polygon_part("seg", vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)], false);
        let pts = sample_wire(&part, "w", 0.125).unwrap();
        assert_eq!(pts.len(), 9);
        for (k, p) in pts.iter().enumerate() {
            assert!((p.x - 0.125 * k as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn sample_minimum_count_and_errors() {
        let part = polygon_part("seg", vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)], false);
        assert_eq!(sample_wire(&part, "w", 10.0).unwrap().len(), 9);
        assert_eq!(sample_wire(&part, "w", 0.001).unwrap().len(), 1001);
        let zero = polygon_part("z", vec![Point3::origin(), Point3::origin()], false);
        assert!(matches!(sample_wire(&zero, "w", 0.1), Err(Error::ZeroLength(_))));
        assert!(matches!(sample_wire(&part, "nope", 0.1), Err(Error::UnknownWire(_))));
    }

    #[test]
    fn frame_of_circle_and_square() {
        let c = Point3::new(0.3, -0.2, 0.0);
        let part = polygon_part("c", circle(0.05, 64, c), true);
        let samples = sample_wire(&part, "w", 0.001).unwrap();
        let f = feature_frame(&samples).unwrap();
        // uniform arc-length samples of a polygon only approximate its centre
        assert!((f.position() - c).norm() < 1e-6);
        assert!((f.axis(2) - Vector3::z()).norm() < 1e-9);
        assert!((f.rotation_matrix().determinant() - 1.0).abs() < 1e-9);

        let corners = unit_square().vertices;
        let f = feature_frame(&corners).unwrap();
        assert!((f.position() - Point3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
        assert!((f.axis(2) - Vector3::z()).norm() < 1e-12);
    }

    #[test]
    fn frame_is_equivariant_for_generic_sets() {
        let mut rng = seeded(11);
        // an ellipse-like planar curve with distinct spreads
        let pts: Vec<Point3> = (0..50)
            .map(|k| {
                let a = TAU * k as f64 / 50.0;
                Point3::new(0.3 * a.cos(), 0.1 * a.sin(), 0.01 * (2.0 * a).sin())
            })
            .collect();
        let f = feature_frame(&pts).unwrap();
        for _ in 0..20 {
            let g = random_rigid(&mut rng, 1.0);
            let moved: Vec<_> = pts.iter().map(|p| g.transform_point(p)).collect();
            let fm = feature_frame(&moved).unwrap();
            let expect = g.compose(&f);
            assert!((fm.position() - expect.position()).norm() < 1e-9);
            // axes agree up to the sign canonicalization
            for i in 0..3 {
                assert!(fm.axis(i).dot(&expect.axis(i)).abs() > 1.0 - 1e-9);
            }
        }
    }

    #[test]
    fn feature_lengths() {
        let f = build_feature(&unit_square(), "w", 0.01, "sq").unwrap();
        assert_eq!(f.cumulative_length, 4.0);
        assert!((f.principal_point - Point3::new(0.5, 0.5, 0.0)).norm() < 1e-12);
        assert!((2..=4).contains(&f.reference_points.len()));

        let part = polygon_part("c", circle(1.0, 360, Point3::origin()), true);
        let f = build_feature(&part, "w", 0.01, "c").unwrap();
        // perimeter of a regular n-gon with circumradius 1
        let polygon = 2.0 * 360.0 * (std::f64::consts::PI / 360.0).sin();
        assert!((f.cumulative_length - polygon).abs() < 1e-12);
        assert!((f.cumulative_length - TAU).abs() / TAU < 1e-4);
    }

    #[test]
    fn recipe_cases() {
        let plate = three_hole_plate();
        let id: PartId = "plate/plate_1|demo".parse().unwrap();
        let wires: Vec<String> = (0..3).map(|k| format!("hole{k}")).collect();
        assert!(matches!(
            build_localization_recipe(&plate, &id, &wires[..2], 0.001),
            Err(Error::InsufficientFeatures { got: 2 })
        ));
        let r = build_localization_recipe(&plate, &id, &wires, 0.001).unwrap();
        assert_eq!(r.features.len(), 3);
        for a in &r.features {
            assert_eq!(a.distances_to_others.len(), 2);
            for (b, d) in &a.distances_to_others {
                assert_eq!(r.distance(b, &a.feature_id), Some(*d));
            }
        }
        r.validate().unwrap();
        assert_eq!(LocalizationRecipe::from_json(&r.to_json()).unwrap(), r);

        let mut line = plate.clone();
        for (k, v) in line.vertices.iter_mut().enumerate() {
            v.y -= [0.0, 0.0, 0.15][k / 4];
        }
        assert!(matches!(
            build_localization_recipe(&line, &id, &wires, 0.001),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn descriptors_are_rigidly_invariant() {
        let plate = three_hole_plate();
        let id: PartId = "plate/plate_1|demo".parse().unwrap();
        let wires: Vec<String> = (0..3).map(|k| format!("hole{k}")).collect();
        let base = build_localization_recipe(&plate, &id, &wires, 0.002).unwrap();
        let mut rng = seeded(12);
        for _ in 0..20 {
            let g = random_rigid(&mut rng, 2.0);
            let moved = build_localization_recipe(&plate.transformed(&g), &id, &wires, 0.002).unwrap();
            for (a, b) in base.features.iter().zip(&moved.features) {
                assert!((a.cumulative_length - b.cumulative_length).abs() < 1e-9);
                assert!((g.transform_point(&a.principal_point) - b.principal_point).norm() < 1e-9);
                for (k, d) in &a.distances_to_others {
                    assert!((d - b.distances_to_others[k]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn closed_wire_start_vertex_independence() {
        let mut pts = circle(0.1, 7, Point3::new(0.1, 0.2, 0.3));
        let a = build_feature(&polygon_part("a", pts.clone(), true), "w", 0.003, "a").unwrap();
        pts.rotate_left(3);
        let b = build_feature(&polygon_part("b", pts, true), "w", 0.003, "b").unwrap();
        assert!((a.cumulative_length - b.cumulative_length).abs() < 1e-9);
        assert!((a.principal_point - b.principal_point).norm() < 1e-9);
    }

    #[test]
    fn sampling_is_deterministic() {
        let plate = three_hole_plate();
        assert_eq!(sample_wire(&plate, "hole1", 0.0007).unwrap(), sample_wire(&plate, "hole1", 0.0007).unwrap());
    }
}

//! Rigid-body math: transforms, poses, principal axes and rigid registration.
//!
//! Transforms follow the `T_AB` convention: `T_AB` maps coordinates expressed
//! in frame B into frame A. Rotations are unit quaternions kept in a canonical
//! sign (`qw >= 0`, ties broken by the first nonzero vector component) so that
//! every rotation has exactly one serialized form `[qx, qy, qz, qw]`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Quaternion, Rotation3, SymmetricEigen, UnitQuaternion, Vector3 as NVector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::partmodel::PartId;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = NVector3<f64>;

/// Relative tolerance used to decide that two eigenvalues are tied.
pub const EIGEN_TIE_TOL: f64 = 1e-12;

/// Allowed deviation of a stored quaternion norm from 1.
pub const UNIT_NORM_TOL: f64 = 1e-9;

fn canonical(q: Quaternion<f64>) -> Quaternion<f64> {
    let flip = if q.w != 0.0 {
        q.w < 0.0
    } else {
        [q.i, q.j, q.k]
            .into_iter()
            .find(|c| *c != 0.0)
            .is_some_and(|c| c < 0.0)
    };
    if flip {
        -q
    } else {
        q
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: UnitQuaternion<f64>,
    translation: Vector3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3) -> Self {
        Self {
            rotation: UnitQuaternion::new_unchecked(canonical(rotation.into_inner())),
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(UnitQuaternion::identity(), Vector3::new(x, y, z))
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vector3, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        Self::new(UnitQuaternion::from_axis_angle(&axis, angle), Vector3::zeros())
    }

    /// Build from a proper rotation matrix and a translation.
    pub fn from_matrix(rotation: &Matrix3<f64>, translation: Vector3) -> Self {
        let rot = Rotation3::from_matrix_unchecked(*rotation);
        Self::new(UnitQuaternion::from_rotation_matrix(&rot), translation)
    }

    /// Build from serialized `[x,y,z]` and `[qx,qy,qz,qw]` arrays.
    ///
    /// The quaternion must already be unit within [`UNIT_NORM_TOL`]; it is
    /// stored without renormalization so that a serialize/parse round trip is
    /// bit-exact. A negative-`qw` quaternion is flipped to its canonical sign.
    pub fn from_arrays(t: [f64; 3], q: [f64; 4]) -> Result<Self> {
        if t.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateGeometry("non-finite transform component".into()));
        }
        let quat = Quaternion::new(q[3], q[0], q[1], q[2]);
        let norm = quat.norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::DegenerateGeometry(format!(
                "quaternion norm {norm} is not 1"
            )));
        }
        Ok(Self {
            rotation: UnitQuaternion::new_unchecked(canonical(quat)),
            translation: Vector3::new(t[0], t[1], t[2]),
        })
    }

    pub fn translation_array(&self) -> [f64; 3] {
        [self.translation.x, self.translation.y, self.translation.z]
    }

    pub fn quaternion_array(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3 {
        &self.translation
    }

    pub fn position(&self) -> Point3 {
        Point3::from(self.translation)
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Local axis `i` (0 = x, 1 = y, 2 = z) expressed in the parent frame.
    pub fn axis(&self, i: usize) -> Vector3 {
        self.rotation_matrix().column(i).into_owned()
    }

    pub fn with_translation(&self, translation: Vector3) -> Self {
        Self {
            rotation: self.rotation,
            translation,
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let q = (self.rotation * other.rotation).into_inner();
        let q = q / q.norm();
        RigidTransform {
            rotation: UnitQuaternion::new_unchecked(canonical(q)),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        RigidTransform {
            rotation: UnitQuaternion::new_unchecked(canonical(inv.into_inner())),
            translation: -(inv * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3) -> Vector3 {
        self.rotation * v
    }

    /// Angle in radians of the relative rotation between `self` and `other`.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    pub fn translation_distance_to(&self, other: &RigidTransform) -> f64 {
        (self.translation - other.translation).norm()
    }
}

impl std::ops::Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

pub fn transform_point(t: &RigidTransform, p: &Point3) -> Point3 {
    t.transform_point(p)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformDoc {
    t: [f64; 3],
    q: [f64; 4],
}

impl Serialize for RigidTransform {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        TransformDoc {
            t: self.translation_array(),
            q: self.quaternion_array(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = TransformDoc::deserialize(deserializer)?;
        RigidTransform::from_arrays(doc.t, doc.q).map_err(serde::de::Error::custom)
    }
}

/// Frame a pose is expressed in.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameTag {
    World,
    Object(PartId),
}

impl fmt::Display for FrameTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameTag::World => f.write_str("world"),
            FrameTag::Object(id) => write!(f, "object:{id}"),
        }
    }
}

impl FromStr for FrameTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "world" {
            Ok(FrameTag::World)
        } else if let Some(rest) = s.strip_prefix("object:") {
            Ok(FrameTag::Object(rest.parse()?))
        } else {
            Err(Error::MalformedId {
                text: s.to_string(),
                reason: "frame tag must be `world` or `object:<part id>`".into(),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    pub transform: RigidTransform,
    pub frame: FrameTag,
}

impl Pose {
    pub fn world(transform: RigidTransform) -> Self {
        Self {
            transform,
            frame: FrameTag::World,
        }
    }

    pub fn in_object(transform: RigidTransform, part: PartId) -> Self {
        Self {
            transform,
            frame: FrameTag::Object(part),
        }
    }

    pub fn position(&self) -> Point3 {
        self.transform.position()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseDoc {
    frame: String,
    t: [f64; 3],
    q: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PoseDoc {
            frame: self.frame.to_string(),
            t: self.transform.translation_array(),
            q: self.transform.quaternion_array(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = PoseDoc::deserialize(deserializer)?;
        let frame = doc.frame.parse().map_err(serde::de::Error::custom)?;
        let transform =
            RigidTransform::from_arrays(doc.t, doc.q).map_err(serde::de::Error::custom)?;
        Ok(Pose { transform, frame })
    }
}

/// Serde adapters writing points as `[x, y, z]` arrays.
pub mod point_serde {
    use super::Point3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(p: &Point3, s: S) -> Result<S::Ok, S::Error> {
        [p.x, p.y, p.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Point3, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        if a.iter().any(|v| !v.is_finite()) {
            return Err(serde::de::Error::custom("non-finite coordinate"));
        }
        Ok(Point3::new(a[0], a[1], a[2]))
    }

    pub mod vec {
        use super::Point3;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(ps: &[Point3], s: S) -> Result<S::Ok, S::Error> {
            ps.iter().map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Point3>, D::Error> {
            let raw = Vec::<[f64; 3]>::deserialize(d)?;
            if raw.iter().flatten().any(|v| !v.is_finite()) {
                return Err(serde::de::Error::custom("non-finite coordinate"));
            }
            Ok(raw.into_iter().map(|a| Point3::new(a[0], a[1], a[2])).collect())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalAxes {
    pub centroid: Point3,
    /// Sorted descending, m².
    pub eigenvalues: [f64; 3],
    pub eigenvectors: [Vector3; 3],
}

impl PrincipalAxes {
    /// True when the spread along the second axis vanishes relative to the first.
    pub fn is_collinear(&self) -> bool {
        self.eigenvalues[1] <= EIGEN_TIE_TOL * self.eigenvalues[0].max(1e-30)
    }
}

pub fn centroid(points: &[Point3]) -> Point3 {
    let sum = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / points.len() as f64)
}

fn canonical_sign(v: Vector3) -> Vector3 {
    let mut best = 0;
    for i in 1..3 {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        -v
    } else {
        v
    }
}

fn lex_descending(a: &Vector3, b: &Vector3) -> std::cmp::Ordering {
    for i in 0..3 {
        match b[i].total_cmp(&a[i]) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

/// Principal component analysis of a point set (population covariance).
///
/// Eigenvalues are sorted descending. Each eigenvector is flipped so that its
/// largest-magnitude component is positive. Eigenvectors of tied eigenvalues
/// are ordered lexicographically descending; a fully isotropic set gets the
/// standard basis.
pub fn principal_axes(points: &[Point3]) -> Result<PrincipalAxes> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let c = centroid(points);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;

    let eig = SymmetricEigen::new(cov);
    let mut pairs: Vec<(f64, Vector3)> = (0..3)
        .map(|i| (eig.eigenvalues[i], canonical_sign(eig.eigenvectors.column(i).into_owned())))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let scale = EIGEN_TIE_TOL * pairs[0].0.max(1e-30);
    let tied = |a: f64, b: f64| (a - b).abs() <= scale;
    let t01 = tied(pairs[0].0, pairs[1].0);
    let t12 = tied(pairs[1].0, pairs[2].0);
    if t01 && t12 {
        pairs[0].1 = Vector3::x();
        pairs[1].1 = Vector3::y();
        pairs[2].1 = Vector3::z();
    } else if t01 {
        pairs[..2].sort_by(|a, b| lex_descending(&a.1, &b.1));
    } else if t12 {
        pairs[1..].sort_by(|a, b| lex_descending(&a.1, &b.1));
    }

    Ok(PrincipalAxes {
        centroid: c,
        eigenvalues: [pairs[0].0, pairs[1].0, pairs[2].0],
        eigenvectors: [pairs[0].1, pairs[1].1, pairs[2].1],
    })
}

/// Sum of squared distances between `t(source_i)` and `target_i`.
pub fn registration_residual(t: &RigidTransform, source: &[Point3], target: &[Point3]) -> f64 {
    source
        .iter()
        .zip(target)
        .map(|(s, d)| (t.transform_point(s) - d).norm_squared())
        .sum()
}

/// Least-squares rigid transform mapping `source` onto `target` (Umeyama with
/// unit scale). The reflection case is corrected so the rotation is proper.
pub fn umeyama_rigid(source: &[Point3], target: &[Point3]) -> Result<RigidTransform> {
    if source.len() != target.len() {
        return Err(Error::LengthMismatch {
            source_len: source.len(),
            target_len: target.len(),
        });
    }
    let axes = principal_axes(source)?;
    if axes.is_collinear() {
        return Err(Error::DegenerateGeometry("source points are collinear".into()));
    }
    let mu_s = axes.centroid;
    let mu_t = centroid(target);
    let mut cross = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        cross += (t - mu_t) * (s - mu_s).transpose();
    }
    cross /= source.len() as f64;

    let svd = cross.svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let mut s = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let rotation = u * s * v_t;
    let translation = mu_t.coords - rotation * mu_s.coords;
    Ok(RigidTransform::from_matrix(&rotation, translation))
}

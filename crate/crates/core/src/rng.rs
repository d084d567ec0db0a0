//! Seeded randomness shared by every simulation in the crate.
//!
//! All generators are `ChaCha8Rng::seed_from_u64(seed)`. Gaussian draws use
//! `rand_distr::StandardNormal` scaled by sigma, one draw per axis in x, y, z
//! order. Nothing here touches wall-clock entropy.

use nalgebra::{Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geom::{RigidTransform, Vector3};

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// splitmix64 finalizer over two inputs; derives independent sub-seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vector3 {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    Vector3::new(x, y, z) * sigma
}

/// Uniformly distributed rotation (Shoemake) with translation components
/// uniform in `[-max_translation, max_translation]`.
pub fn random_rigid<R: Rng + ?Sized>(rng: &mut R, max_translation: f64) -> RigidTransform {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let u3: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let q = Quaternion::new(b * u3.cos(), a * u2.sin(), a * u2.cos(), b * u3.sin());
    let t = if max_translation > 0.0 {
        Vector3::new(
            rng.random_range(-max_translation..max_translation),
            rng.random_range(-max_translation..max_translation),
            rng.random_range(-max_translation..max_translation),
        )
    } else {
        Vector3::zeros()
    };
    RigidTransform::new(UnitQuaternion::new_normalize(q), t)
}

//! Deterministic synthetic scenes: random Gaussians in a unit box and a ring
//! of cameras around it. Fixture generator for tests and the CLI.

use crate::camera::Camera;
use crate::gaussian::{Gaussian, ShCoeffs};
use crate::math::{Quat, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` random Gaussians in the unit box `[-0.5, 0.5]^3`: log-uniform scales
/// in `[1e-3, 0.3]`, uniform rotations, opacity in `[0.2, 0.95]`, degree-0
/// colors. Byte-for-byte reproducible from the seed.
pub fn generate_gaussians(seed: u64, n: usize) -> Vec<Gaussian> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mean = Vec3::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            );
            let log_lo = (1e-3f64).ln();
            let log_hi = (0.3f64).ln();
            let scale = Vec3::new(
                rng.gen_range(log_lo..log_hi).exp(),
                rng.gen_range(log_lo..log_hi).exp(),
                rng.gen_range(log_lo..log_hi).exp(),
            );
            let rotation = uniform_rotation(&mut rng);
            let opacity = rng.gen_range(0.2..0.95);
            let color = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            Gaussian::new(mean, scale, rotation, opacity, ShCoeffs::from_base_color(color), f64::INFINITY)
                .expect("generated Gaussian is valid")
        })
        .collect()
}

/// Uniformly distributed unit quaternion (Shoemake's subgroup algorithm).
pub fn uniform_rotation(rng: &mut impl Rng) -> Quat {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let u3: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    Quat::new(a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos())
}

/// Cameras on a ring of the given radius around the origin, slightly
/// elevated, all looking at the box center.
pub fn ring_cameras(count: usize, width: u32, height: u32, focal: f64, radius: f64, near: f64) -> Vec<Camera> {
    (0..count)
        .map(|i| {
            let angle = i as f64 / count as f64 * std::f64::consts::TAU;
            let eye = Vec3::new(
                radius * angle.sin(),
                0.25 * radius,
                -radius * angle.cos(),
            );
            Camera::look_at(width, height, focal, focal, near, eye, Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0))
                .expect("ring camera is valid")
        })
        .collect()
}

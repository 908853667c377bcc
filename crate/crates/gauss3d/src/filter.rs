//! Adaptive 3D anti-aliasing filter.
//!
//! The render-time sampling frequency of a Gaussian is `v = f / d` (focal
//! length in pixels over view-space depth). The effective frequency is capped
//! by the maximum frequency seen from the training cameras, the covariance is
//! dilated by `k / v_eff^2` along the diagonal, and the blending amplitude is
//! rescaled by the change of the covariance projected perpendicular to the
//! viewing direction. The amplitude factor is evaluated in closed form from
//! the scales and the body-frame viewing direction; no matrix is inverted.

use crate::camera::Camera;
use crate::culling;
use crate::gaussian::Gaussian;
use crate::math::{Mat3, Vec3};

/// Sentinel for "no training camera constrains this Gaussian".
pub const UNBOUNDED_FREQUENCY: f64 = f64::INFINITY;

/// Render-time sampling frequency `v = f / d` in pixels per world unit, with
/// `f = max(fx, fy)`. `None` signals a mean behind the camera; the caller
/// decides how to proceed (the Gaussian may still be visible).
pub fn sampling_frequency(camera: &Camera, mean_view: Vec3) -> Option<f64> {
    if mean_view.z > 0.0 {
        Some(camera.fx.max(camera.fy) / mean_view.z)
    } else {
        None
    }
}

/// Maximum sampling frequency of a world point over the given cameras.
///
/// With `visible_only` set, only cameras whose view frustum contains the point
/// participate; returns [`UNBOUNDED_FREQUENCY`] when no camera qualifies.
pub fn max_training_frequency(mean: Vec3, cameras: &[Camera], visible_only: bool) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for cam in cameras {
        let mean_view = cam.view_point(mean);
        if visible_only && !culling::view_frustum_contains_point(cam, mean_view) {
            continue;
        }
        if let Some(v) = sampling_frequency(cam, mean_view) {
            best = best.max(v);
        }
    }
    if best > 0.0 {
        best
    } else {
        UNBOUNDED_FREQUENCY
    }
}

/// Stamps `v_train` on every Gaussian of a scene.
pub fn assign_training_frequencies(scene: &mut [Gaussian], cameras: &[Camera], visible_only: bool) {
    for g in scene {
        g.v_train = max_training_frequency(g.mean, cameras, visible_only);
    }
}

/// Effective filter frequency `v' = min(v_train, v)`.
///
/// A mean behind the camera has no render-time frequency; the filter then
/// falls back to the training frequency alone.
pub fn effective_frequency(v_train: f64, v_hat: Option<f64>) -> f64 {
    match v_hat {
        Some(v) => v_train.min(v),
        None => v_train,
    }
}

/// Filtered squared scales `s_hat_i = s_i^2 + k / v_eff^2` and their square
/// roots (the standard deviations used to rebuild the Gaussian transform).
pub fn filtered_scales(scale: Vec3, k: f64, v_eff: f64) -> (Vec3, Vec3) {
    let c = if v_eff.is_finite() { k / (v_eff * v_eff) } else { 0.0 };
    let sq = Vec3::new(
        scale.x * scale.x + c,
        scale.y * scale.y + c,
        scale.z * scale.z + c,
    );
    (sq, Vec3::new(sq.x.sqrt(), sq.y.sqrt(), sq.z.sqrt()))
}

/// Perpendicular amplitude scaling factor in `(0, 1]`.
///
/// `rotation` is the Gaussian's rotation matrix and `dir` the unit vector from
/// the camera center to the mean. The factor compares the determinant of the
/// covariance projected orthogonally to `dir` before and after filtering.
pub fn amplitude_factor(scale: Vec3, rotation: &Mat3, dir: Vec3, k: f64, v_eff: f64) -> f64 {
    let d = rotation.transpose().mul_vec(dir);
    let (d1, d2, d3) = (d.x * d.x, d.y * d.y, d.z * d.z);
    let (s1, s2, s3) = (scale.x * scale.x, scale.y * scale.y, scale.z * scale.z);
    let (s_hat, _) = filtered_scales(scale, k, v_eff);
    let num = d1 * s2 * s3 + d2 * s1 * s3 + d3 * s1 * s2;
    let den = d1 * s_hat.y * s_hat.z + d2 * s_hat.x * s_hat.z + d3 * s_hat.x * s_hat.y;
    (num / den).sqrt()
}

/// Per-frame filter state of one Gaussian under one camera.
#[derive(Clone, Copy, Debug)]
pub struct FilterState {
    pub k: f64,
    /// Render-time sampling frequency; `None` when the mean is behind the camera.
    pub v_hat: Option<f64>,
    pub v_eff: f64,
    /// Filtered squared scales.
    pub s_hat: Vec3,
    /// Filtered standard deviations, `sqrt(s_hat)` componentwise.
    pub s_hat_std: Vec3,
    pub amplitude: f64,
}

impl FilterState {
    pub fn compute(g: &Gaussian, camera: &Camera, k: f64) -> Self {
        let mean_view = camera.view_point(g.mean);
        let v_hat = sampling_frequency(camera, mean_view);
        let v_eff = effective_frequency(g.v_train, v_hat);
        let (s_hat, s_hat_std) = filtered_scales(g.scale, k, v_eff);
        // Degenerate only when the camera sits exactly on the mean; the
        // Gaussian is discarded by the camera-inside bounding test anyway.
        let dir = (g.mean - camera.center_world())
            .try_normalized()
            .unwrap_or(Vec3::new(0.0, 0.0, 1.0));
        let amplitude = amplitude_factor(g.scale, &g.rotation.to_mat3(), dir, k, v_eff);
        FilterState { k, v_hat, v_eff, s_hat, s_hat_std, amplitude }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Mat4, Quat};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn camera_with_focal(f: f64) -> Camera {
        Camera::new(64, 64, f, f, 32.0, 32.0, 0.01, Mat4::IDENTITY).unwrap()
    }

    fn random_unit(rng: &mut impl Rng) -> Vec3 {
        loop {
            let v = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if let Some(u) = v.try_normalized() {
                if v.norm() < 1.0 {
                    return u;
                }
            }
        }
    }

    fn random_rotation(rng: &mut impl Rng) -> Mat3 {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let u3: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        Quat::new(a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos()).to_mat3()
    }

    fn nalgebra_cov(scale: Vec3, rot: &Mat3, bump: f64) -> nalgebra::Matrix3<f64> {
        let r = nalgebra::Matrix3::from_row_slice(&[
            rot.m[0][0], rot.m[0][1], rot.m[0][2],
            rot.m[1][0], rot.m[1][1], rot.m[1][2],
            rot.m[2][0], rot.m[2][1], rot.m[2][2],
        ]);
        let s = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(
            scale.x * scale.x,
            scale.y * scale.y,
            scale.z * scale.z,
        ));
        r * s * r.transpose() + nalgebra::Matrix3::identity() * bump
    }

    #[test]
    fn sampling_frequency_is_focal_over_depth() {
        let cam = camera_with_focal(800.0);
        let v = sampling_frequency(&cam, Vec3::new(0.3, -0.2, 4.0)).unwrap();
        assert_relative_eq!(v, 200.0, epsilon = 1e-12);
        let v = sampling_frequency(&cam, Vec3::new(0.0, 0.0, 0.5)).unwrap();
        assert_relative_eq!(v, 1600.0, epsilon = 1e-12);
        assert!(sampling_frequency(&cam, Vec3::new(0.0, 0.0, -1.0)).is_none());
        assert!(sampling_frequency(&cam, Vec3::new(0.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn doubling_resolution_and_focal_doubles_frequency() {
        let base = camera_with_focal(400.0);
        let doubled = Camera::new(128, 128, 800.0, 800.0, 64.0, 64.0, 0.01, Mat4::IDENTITY).unwrap();
        let p = Vec3::new(0.1, 0.1, 3.0);
        let a = sampling_frequency(&base, p).unwrap();
        let b = sampling_frequency(&doubled, p).unwrap();
        assert_relative_eq!(b, 2.0 * a, epsilon = 1e-12);
    }

    #[test]
    fn training_frequency_empty_list_is_unbounded() {
        assert_eq!(max_training_frequency(Vec3::ZERO, &[], true), UNBOUNDED_FREQUENCY);
    }

    #[test]
    fn training_frequency_single_camera() {
        let cam = Camera::look_at(
            64, 64, 800.0, 800.0, 0.01,
            Vec3::new(0.0, 0.0, -4.0), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let v = max_training_frequency(Vec3::ZERO, &[cam], true);
        assert_relative_eq!(v, 200.0, epsilon = 1e-12);
    }

    #[test]
    fn training_frequency_takes_max_over_cameras() {
        let far = Camera::look_at(
            64, 64, 800.0, 800.0, 0.01,
            Vec3::new(0.0, 0.0, -4.0), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let close = Camera::look_at(
            64, 64, 800.0, 800.0, 0.01,
            Vec3::new(0.0, 0.0, -2.0), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let cams = [far, close];
        // Brute force over the cameras seeing the mean.
        let expect = cams
            .iter()
            .filter_map(|c| sampling_frequency(c, c.view_point(Vec3::ZERO)))
            .fold(f64::NEG_INFINITY, f64::max);
        let got = max_training_frequency(Vec3::ZERO, &cams, true);
        assert_relative_eq!(got, expect, epsilon = 1e-12);
        assert_relative_eq!(got, 400.0, epsilon = 1e-12);
    }

    #[test]
    fn training_frequency_visibility_rule() {
        // Camera looking away from the point: invisible, so unbounded when
        // restricted to visible cameras, bounded otherwise... but the mean is
        // behind the camera so there is no frequency either way.
        let cam = Camera::look_at(
            64, 64, 800.0, 800.0, 0.01,
            Vec3::new(0.0, 0.0, -4.0), Vec3::new(0.0, 0.0, -8.0), Vec3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        assert_eq!(max_training_frequency(Vec3::ZERO, std::slice::from_ref(&cam), true), UNBOUNDED_FREQUENCY);
        assert_eq!(max_training_frequency(Vec3::ZERO, std::slice::from_ref(&cam), false), UNBOUNDED_FREQUENCY);

        // Point in front but far outside the viewport: only the
        // all-cameras rule picks it up.
        let side = Camera::look_at(
            64, 64, 800.0, 800.0, 0.01,
            Vec3::new(0.0, 0.0, -4.0), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let p = Vec3::new(3.0, 0.0, 0.0);
        assert_eq!(max_training_frequency(p, std::slice::from_ref(&side), true), UNBOUNDED_FREQUENCY);
        let v = max_training_frequency(p, std::slice::from_ref(&side), false);
        assert_relative_eq!(v, 200.0, epsilon = 1e-12);
    }

    #[test]
    fn filtered_scales_disabled_filter() {
        let s = Vec3::new(0.3, 0.7, 1.1);
        let (sq, std) = filtered_scales(s, 0.0, 5.0);
        assert_relative_eq!(sq.x, 0.09, max_relative = 1e-15);
        assert_relative_eq!(sq.y, 0.49, max_relative = 1e-15);
        assert_relative_eq!(sq.z, 1.21, max_relative = 1e-15);
        assert_relative_eq!(std.x, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn filtered_scales_basic_arithmetic() {
        let (sq, _) = filtered_scales(Vec3::splat(1.0), 0.3, 1.0);
        assert_relative_eq!(sq.x, 1.3, epsilon = 1e-15);
        assert_relative_eq!(sq.y, 1.3, epsilon = 1e-15);
        assert_relative_eq!(sq.z, 1.3, epsilon = 1e-15);
    }

    #[test]
    fn filtered_scales_infinite_frequency_limit() {
        let s = Vec3::new(0.3, 0.7, 1.1);
        let (sq, _) = filtered_scales(s, 0.3, f64::INFINITY);
        assert_eq!(sq, Vec3::new(s.x * s.x, s.y * s.y, s.z * s.z));
    }

    #[test]
    fn amplitude_is_one_without_filter() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..50 {
            let s = Vec3::new(
                rng.gen_range(0.01..2.0),
                rng.gen_range(0.01..2.0),
                rng.gen_range(0.01..2.0),
            );
            let amp = amplitude_factor(s, &random_rotation(&mut rng), random_unit(&mut rng), 0.0, 7.0);
            assert_eq!(amp, 1.0);
        }
    }

    #[test]
    fn amplitude_isotropic_closed_form() {
        let sigma = 0.8;
        let (k, v) = (0.3, 2.0);
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..20 {
            let amp = amplitude_factor(
                Vec3::splat(sigma),
                &random_rotation(&mut rng),
                random_unit(&mut rng),
                k,
                v,
            );
            let expect = sigma * sigma / (sigma * sigma + k / (v * v));
            assert_relative_eq!(amp, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn amplitude_axis_aligned_uses_perpendicular_axes_only() {
        let s = Vec3::new(0.1, 0.5, 1.2);
        let (k, v) = (0.3, 1.5);
        let rot = Mat3::IDENTITY;
        let amp = amplitude_factor(s, &rot, Vec3::new(1.0, 0.0, 0.0), k, v);
        let c = k / (v * v);
        let expect = ((s.y * s.y * s.z * s.z) / ((s.y * s.y + c) * (s.z * s.z + c))).sqrt();
        assert_relative_eq!(amp, expect, max_relative = 1e-12);
    }

    #[test]
    fn amplitude_matches_projected_determinant_oracle() {
        // Closed form vs the explicit |Sigma| d^T Sigma^-1 d ratio.
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..500 {
            let s = Vec3::new(
                rng.gen_range(0.05f64..3.0),
                rng.gen_range(0.05f64..3.0),
                rng.gen_range(0.05f64..3.0),
            );
            let rot = random_rotation(&mut rng);
            let d = random_unit(&mut rng);
            let k = rng.gen_range(0.05..0.5);
            let v = rng.gen_range(0.2..50.0);
            let amp = amplitude_factor(s, &rot, d, k, v);

            let bump = k / (v * v);
            let cov = nalgebra_cov(s, &rot, 0.0);
            let cov_hat = nalgebra_cov(s, &rot, bump);
            let nd = nalgebra::Vector3::new(d.x, d.y, d.z);
            let quad = (nd.transpose() * cov.try_inverse().unwrap() * nd)[(0, 0)];
            let quad_hat = (nd.transpose() * cov_hat.try_inverse().unwrap() * nd)[(0, 0)];
            let expect = ((cov.determinant() * quad) / (cov_hat.determinant() * quad_hat)).sqrt();
            assert_relative_eq!(amp, expect, max_relative = 1e-9);
        }
    }

    #[test]
    fn perpendicular_determinant_identity() {
        // |Sigma_perp| via explicit projection equals |Sigma| d^T Sigma^-1 d.
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..500 {
            let s = Vec3::new(
                rng.gen_range(0.1f64..5.0),
                rng.gen_range(0.1f64..5.0),
                rng.gen_range(0.1f64..5.0),
            );
            let rot = random_rotation(&mut rng);
            let d = random_unit(&mut rng);
            let rs = rot.mul_diag(s);
            let basis = crate::math::orthonormal_basis(d);
            let rotated = basis.transpose() * (rs * rs.transpose()) * basis;
            let det_perp = rotated.m[1][1] * rotated.m[2][2] - rotated.m[1][2] * rotated.m[2][1];
            let full = rs * rs.transpose();
            let inv = full.inverse().unwrap();
            let expect = full.determinant() * d.dot(inv.mul_vec(d));
            assert_relative_eq!(det_perp, expect, max_relative = 1e-9);
        }
    }

    #[test]
    fn amplitude_at_least_volume_factor() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..500 {
            let s = Vec3::new(
                rng.gen_range(0.02f64..3.0),
                rng.gen_range(0.02f64..3.0),
                rng.gen_range(0.02f64..3.0),
            );
            let rot = random_rotation(&mut rng);
            let d = random_unit(&mut rng);
            let k = rng.gen_range(0.05..0.5);
            let v = rng.gen_range(0.2..20.0);
            let amp = amplitude_factor(s, &rot, d, k, v);
            let (s_hat, _) = filtered_scales(s, k, v);
            let vol = ((s.x * s.x * s.y * s.y * s.z * s.z)
                / (s_hat.x * s_hat.y * s_hat.z))
                .sqrt();
            assert!(amp >= vol - 1e-12, "amp {amp} < volume factor {vol}");
            assert!(amp <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn amplitude_monotone_in_filter_strength() {
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..100 {
            let s = Vec3::new(
                rng.gen_range(0.05f64..2.0),
                rng.gen_range(0.05f64..2.0),
                rng.gen_range(0.05f64..2.0),
            );
            let rot = random_rotation(&mut rng);
            let d = random_unit(&mut rng);
            let mut last = f64::INFINITY;
            for c in [0.0, 0.01, 0.1, 1.0, 10.0] {
                // k / v^2 = c realized with v = 1.
                let amp = amplitude_factor(s, &rot, d, c, 1.0);
                assert!(amp <= last + 1e-15);
                last = amp;
            }
        }
    }

    #[test]
    fn closer_camera_does_not_shrink_filter() {
        // Once v >= v_train the state is pinned to v_train.
        let g = Gaussian::new(
            Vec3::new(0.0, 0.0, 2.0),
            Vec3::splat(0.05),
            Quat::IDENTITY,
            0.8,
            crate::gaussian::ShCoeffs::from_base_color([0.5; 3]),
            100.0,
        )
        .unwrap();
        let near_cam = camera_with_focal(800.0); // v = 400 > v_train
        let nearer_cam = camera_with_focal(3200.0); // v = 1600
        let a = FilterState::compute(&g, &near_cam, 0.3);
        let b = FilterState::compute(&g, &nearer_cam, 0.3);
        assert_eq!(a.v_eff, 100.0);
        assert_eq!(b.v_eff, 100.0);
        assert_eq!(a.s_hat, b.s_hat);
        assert_eq!(a.amplitude, b.amplitude);
    }

    #[test]
    fn behind_camera_uses_training_frequency() {
        let g = Gaussian::new(
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::splat(0.05),
            Quat::IDENTITY,
            0.8,
            crate::gaussian::ShCoeffs::from_base_color([0.5; 3]),
            50.0,
        )
        .unwrap();
        let cam = camera_with_focal(800.0);
        let st = FilterState::compute(&g, &cam, 0.3);
        assert!(st.v_hat.is_none());
        assert_eq!(st.v_eff, 50.0);
    }
}

//! Brute-force reference renderer.
//!
//! Evaluates every Gaussian at every pixel with no bounding, binning or
//! culling, minimizing the Mahalanobis distance along each pixel ray through
//! the explicit inverse of the filtered covariance. This is a deliberately
//! independent code path from the plane-transform pipeline; the two must
//! agree to within accumulation noise, which is the renderer's primary
//! correctness gate.

use crate::camera::Camera;
use crate::filter::FilterState;
use crate::gaussian::{covariance, sh_to_color, Gaussian, ShCoeffs};
use crate::math::{Mat3, Vec3};
use crate::raster::{blend_pixel, ConfigError, Contribution, Framebuffer, RenderConfig};
use rayon::prelude::*;

/// Smallest filtered variance admitted into the inversion.
const MIN_FILTERED_VARIANCE: f64 = 1e-12;

struct OracleGaussian {
    index: usize,
    mean: Vec3,
    /// Inverse of the filtered world-space covariance.
    inv_cov: Mat3,
    opacity_eff: f64,
    sh: ShCoeffs,
}

/// Renders the scene by per-pixel ray minimization; rejection rules and
/// blending are identical to the tile pipeline.
pub fn render_reference(
    scene: &[Gaussian],
    camera: &Camera,
    config: &RenderConfig,
) -> Result<Framebuffer, ConfigError> {
    config.validate()?;
    let origin = camera.center_world();
    let view_rotation_t = camera.rotation().transpose();

    let prepared: Vec<OracleGaussian> = scene
        .iter()
        .enumerate()
        .filter_map(|(index, g)| {
            let fs = FilterState::compute(g, camera, config.k);
            let guarded = Vec3::new(
                fs.s_hat.x.max(MIN_FILTERED_VARIANCE).sqrt(),
                fs.s_hat.y.max(MIN_FILTERED_VARIANCE).sqrt(),
                fs.s_hat.z.max(MIN_FILTERED_VARIANCE).sqrt(),
            );
            let inv_cov = covariance(guarded, g.rotation).inverse()?;
            // The pipeline discards Gaussians whose cutoff ellipsoid contains
            // the camera center; mirror that rule.
            let to_cam = origin - g.mean;
            if to_cam.dot(inv_cov.mul_vec(to_cam)) < config.tau_rho {
                return None;
            }
            let opacity_eff = (g.opacity * fs.amplitude).min(config.alpha_clamp);
            if opacity_eff < config.alpha_cutoff {
                return None;
            }
            Some(OracleGaussian { index, mean: g.mean, inv_cov, opacity_eff, sh: g.sh })
        })
        .collect();

    let width = camera.width;
    let rows: Vec<Vec<(Vec3, f64)>> = (0..camera.height)
        .into_par_iter()
        .map(|py| {
            let mut row = Vec::with_capacity(width as usize);
            let mut contribs: Vec<Contribution> = Vec::new();
            for px in 0..width {
                let dir_view = Vec3::new(
                    (px as f64 + 0.5 - camera.cx) / camera.fx,
                    (py as f64 + 0.5 - camera.cy) / camera.fy,
                    1.0,
                );
                let dir_world = view_rotation_t.mul_vec(dir_view);
                contribs.clear();
                for og in &prepared {
                    let m_dir = og.inv_cov.mul_vec(dir_world);
                    let diff = og.mean - origin;
                    // Unconstrained minimizer of the quadratic along the ray;
                    // its view depth is exactly t because dir_view.z = 1.
                    let t = dir_world.dot(og.inv_cov.mul_vec(diff)) / dir_world.dot(m_dir);
                    if t <= camera.near {
                        continue;
                    }
                    let offset = dir_world * t - diff;
                    let rho2 = offset.dot(og.inv_cov.mul_vec(offset));
                    if rho2 >= config.tau_rho {
                        continue;
                    }
                    let alpha = og.opacity_eff * (-0.5 * rho2).exp();
                    if alpha < config.alpha_cutoff {
                        continue;
                    }
                    let color = sh_to_color(
                        &og.sh,
                        dir_world.try_normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0)),
                    );
                    contribs.push(Contribution { rho2, alpha, depth: t, color, source: og.index });
                }
                row.push(blend_pixel(&mut contribs, config));
            }
            row
        })
        .collect();

    let mut fb = Framebuffer::new(camera.width, camera.height);
    for (py, row) in rows.into_iter().enumerate() {
        for (px, (rgb, t)) in row.into_iter().enumerate() {
            let i = py * width as usize + px;
            fb.rgb[i * 3] = rgb.x;
            fb.rgb[i * 3 + 1] = rgb.y;
            fb.rgb[i * 3 + 2] = rgb.z;
            fb.transmittance[i] = t;
        }
    }
    Ok(fb)
}

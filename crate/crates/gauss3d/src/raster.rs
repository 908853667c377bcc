//! Tile-based rendering pipeline: preprocess (filter, cull, bound), tile
//! binning, exact per-pixel 3D evaluation through plane intersection, and
//! front-to-back compositing in exact per-pixel depth order.

use crate::bounding::{angles_to_rect, angular_bounds, ScreenRect};
use crate::camera::{Camera, GaussianFrame};
use crate::culling::{self, closest_point_on_line, transform_plane, Frustum};
use crate::filter::FilterState;
use crate::gaussian::{sh_to_color, Gaussian, ShCoeffs};
use crate::math::{Plane, Vec3};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("alpha_cutoff must be below alpha_clamp")]
    AlphaOrdering,
    #[error("bounded resort windows are reserved and not implemented; use None")]
    ResortWindowUnsupported,
}

/// Rendering thresholds and switches. Everything the blending and culling
/// math compares against lives here.
#[derive(Clone, Debug)]
pub struct RenderConfig {
    /// Smoothing kernel size; `0` disables the anti-aliasing filter.
    pub k: f64,
    /// Squared Mahalanobis cutoff (`9` bounds the 3-sigma ellipsoid).
    pub tau_rho: f64,
    /// Angular clamp margin for the screen bounds.
    pub epsilon_angle: f64,
    pub tile_size: usize,
    /// Contributions with alpha below this never blend (1/255).
    pub alpha_cutoff: f64,
    /// Upper clamp on effective opacity.
    pub alpha_clamp: f64,
    /// Front-to-back compositing stops below this transmittance.
    pub transmittance_epsilon: f64,
    pub background: Vec3,
    /// Reserved for a bounded-window approximate resort; must be `None`
    /// (blending always sorts exactly).
    pub resort_window: Option<usize>,
    /// Close tile frusta with the near plane instead of the separate
    /// whole-ellipsoid depth rule.
    pub tile_near_plane: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            k: 0.3,
            tau_rho: 9.0,
            epsilon_angle: 1e-4,
            tile_size: 16,
            alpha_cutoff: 1.0 / 255.0,
            alpha_clamp: 0.999,
            transmittance_epsilon: 1e-4,
            background: Vec3::ZERO,
            resort_window: None,
            tile_near_plane: false,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tau_rho > 0.0 && self.tau_rho.is_finite()) {
            return Err(ConfigError::NonPositive("tau_rho"));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(ConfigError::NonPositive("k"));
        }
        if !(self.epsilon_angle > 0.0 && self.epsilon_angle < 0.1) {
            return Err(ConfigError::NonPositive("epsilon_angle"));
        }
        if self.tile_size == 0 {
            return Err(ConfigError::NonPositive("tile_size"));
        }
        if !(self.alpha_cutoff > 0.0 && self.alpha_clamp < 1.0) {
            return Err(ConfigError::NonPositive("alpha thresholds"));
        }
        if self.alpha_cutoff >= self.alpha_clamp {
            return Err(ConfigError::AlphaOrdering);
        }
        let eps_ok = self.transmittance_epsilon > 0.0;
        if !eps_ok {
            return Err(ConfigError::NonPositive("transmittance_epsilon"));
        }
        if self.resort_window.is_some() {
            return Err(ConfigError::ResortWindowUnsupported);
        }
        Ok(())
    }
}

/// Per-frame derived state of one visible Gaussian.
#[derive(Clone, Debug)]
pub struct PreparedGaussian {
    /// Index into the source scene.
    pub index: usize,
    /// Transforms built with the filtered standard deviations.
    pub frame: GaussianFrame,
    /// Perpendicular amplitude factor of the smoothing filter.
    pub amplitude: f64,
    /// `opacity * amplitude`, clamped to `alpha_clamp`.
    pub opacity_eff: f64,
    /// Viewport-clipped screen bounds.
    pub rect: ScreenRect,
    pub sh: ShCoeffs,
}

/// One accepted per-pixel sample prior to blending.
#[derive(Clone, Copy, Debug)]
pub struct Contribution {
    pub rho2: f64,
    pub alpha: f64,
    /// View-space depth of the max-contribution point.
    pub depth: f64,
    pub color: Vec3,
    pub source: usize,
}

/// Linear RGB accumulation plus per-pixel remaining transmittance.
#[derive(Clone, Debug)]
pub struct Framebuffer {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB triples.
    pub rgb: Vec<f64>,
    pub transmittance: Vec<f64>,
}

impl Framebuffer {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Framebuffer { width, height, rgb: vec![0.0; n * 3], transmittance: vec![1.0; n] }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f64; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    fn set_pixel(&mut self, x: u32, y: u32, rgb: Vec3, t: f64) {
        let i = y as usize * self.width as usize + x as usize;
        self.rgb[i * 3] = rgb.x;
        self.rgb[i * 3 + 1] = rgb.y;
        self.rgb[i * 3 + 2] = rgb.z;
        self.transmittance[i] = t;
    }

    /// Largest per-channel absolute difference to another framebuffer.
    pub fn max_difference(&self, other: &Framebuffer) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.rgb
            .iter()
            .zip(other.rgb.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PreprocessStats {
    pub input: usize,
    /// Gaussians surviving whole-view-frustum culling.
    pub after_frustum_cull: usize,
    /// Gaussians surviving all preprocessing (culling, opacity, bounds).
    pub prepared: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BinStats {
    /// Gaussian/tile pairs from rectangle overlap alone.
    pub rect_pairs: usize,
    /// Pairs surviving frustum-based tile culling.
    pub kept_pairs: usize,
}

/// Filters, culls and bounds every Gaussian of the scene for one camera.
pub fn preprocess(scene: &[Gaussian], camera: &Camera, config: &RenderConfig) -> Vec<PreparedGaussian> {
    preprocess_with_stats(scene, camera, config).0
}

pub fn preprocess_with_stats(
    scene: &[Gaussian],
    camera: &Camera,
    config: &RenderConfig,
) -> (Vec<PreparedGaussian>, PreprocessStats) {
    let per_gaussian: Vec<(bool, Option<PreparedGaussian>)> = scene
        .par_iter()
        .enumerate()
        .map(|(index, g)| {
            // The filter enlarges the ellipsoid, so it runs before culling.
            let fs = FilterState::compute(g, camera, config.k);
            let frame = GaussianFrame::new(camera, &g.rotation.to_mat3(), fs.s_hat_std, g.mean);
            if !culling::cull_view_frustum(&frame, camera, config.tau_rho) {
                return (false, None);
            }
            let opacity_eff = (g.opacity * fs.amplitude).min(config.alpha_clamp);
            if opacity_eff < config.alpha_cutoff {
                return (true, None);
            }
            let bounds = angular_bounds(&frame, config.tau_rho, config.epsilon_angle);
            if bounds.is_invalid() {
                return (true, None);
            }
            let rect = angles_to_rect(&bounds, camera);
            if rect.is_empty() {
                return (true, None);
            }
            let pg = PreparedGaussian {
                index,
                frame,
                amplitude: fs.amplitude,
                opacity_eff,
                rect,
                sh: g.sh,
            };
            (true, Some(pg))
        })
        .collect();

    let mut stats = PreprocessStats { input: scene.len(), ..Default::default() };
    let mut out = Vec::new();
    for (kept, pg) in per_gaussian {
        stats.after_frustum_cull += kept as usize;
        if let Some(pg) = pg {
            out.push(pg);
        }
        stats.prepared = out.len();
    }
    (out, stats)
}

/// Per-tile index lists into a prepared-Gaussian array.
#[derive(Clone, Debug)]
pub struct TileBins {
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub tile_size: usize,
    pub lists: Vec<Vec<usize>>,
}

impl TileBins {
    pub fn tile_index(&self, tx: usize, ty: usize) -> usize {
        ty * self.tiles_x + tx
    }

    /// Pixel bounds of a tile, clipped to the viewport.
    pub fn tile_bounds(&self, tx: usize, ty: usize, camera: &Camera) -> (f64, f64, f64, f64) {
        let ts = self.tile_size as f64;
        (
            tx as f64 * ts,
            ((tx + 1) as f64 * ts).min(camera.width as f64),
            ty as f64 * ts,
            ((ty + 1) as f64 * ts).min(camera.height as f64),
        )
    }
}

/// Pixel-index range whose centers fall inside `[lo, hi]`, clipped to the
/// viewport extent `n`.
fn pixel_range(lo: f64, hi: f64, n: u32) -> Option<(usize, usize)> {
    let first = (lo - 0.5).ceil().max(0.0) as i64;
    let last = (hi - 0.5).floor().min(n as f64 - 1.0) as i64;
    if first > last {
        None
    } else {
        Some((first as usize, last as usize))
    }
}

/// Assigns prepared Gaussians to every tile their rectangle overlaps and that
/// frustum-based tile culling keeps. Per-tile lists preserve source order.
pub fn bin_to_tiles(
    prepared: &[PreparedGaussian],
    camera: &Camera,
    config: &RenderConfig,
) -> (TileBins, BinStats) {
    let ts = config.tile_size;
    let tiles_x = (camera.width as usize).div_ceil(ts);
    let tiles_y = (camera.height as usize).div_ceil(ts);
    let mut bins = TileBins { tiles_x, tiles_y, tile_size: ts, lists: vec![Vec::new(); tiles_x * tiles_y] };
    let mut stats = BinStats::default();
    for (pi, pg) in prepared.iter().enumerate() {
        let Some((px0, px1)) = pixel_range(pg.rect.x_min, pg.rect.x_max, camera.width) else {
            continue;
        };
        let Some((py0, py1)) = pixel_range(pg.rect.y_min, pg.rect.y_max, camera.height) else {
            continue;
        };
        for ty in py0 / ts..=py1 / ts {
            for tx in px0 / ts..=px1 / ts {
                stats.rect_pairs += 1;
                let (x0, x1, y0, y1) = bins.tile_bounds(tx, ty, camera);
                let tile = Frustum::tile(x0, x1, y0, y1);
                if culling::tile_cull(
                    &pg.frame,
                    &tile,
                    config.tau_rho,
                    camera.near,
                    config.tile_near_plane,
                ) {
                    stats.kept_pairs += 1;
                    bins.lists[ty * tiles_x + tx].push(pi);
                }
            }
        }
    }
    (bins, stats)
}

/// Evaluates one Gaussian at a continuous pixel coordinate.
///
/// The pixel ray is the intersection of the planes `x = px` and `y = py` in
/// pixel space; both are pulled into the Gaussian's unit space where the
/// least-norm point of their intersection line carries the maximum
/// contribution.
pub fn evaluate_at(
    pg: &PreparedGaussian,
    camera: &Camera,
    config: &RenderConfig,
    x: f64,
    y: f64,
) -> Option<Contribution> {
    let plane_x = transform_plane(&pg.frame.t_prime, &Plane::new(1.0, 0.0, 0.0, -x));
    let plane_y = transform_plane(&pg.frame.t_prime, &Plane::new(0.0, 1.0, 0.0, -y));
    let (u, rho2) = closest_point_on_line(&plane_x, &plane_y)?;
    if rho2 >= config.tau_rho {
        return None;
    }
    let depth = pg.frame.view_depth(u);
    if depth <= camera.near {
        return None;
    }
    let alpha = pg.opacity_eff * (-0.5 * rho2).exp();
    if alpha < config.alpha_cutoff {
        return None;
    }
    // World-space direction from the camera center to the max-contribution
    // point: rotate its view-space position back.
    let view_point = pg.frame.t_view.transform_point(u);
    let dir = camera
        .rotation()
        .transpose()
        .mul_vec(view_point)
        .try_normalized()
        .unwrap_or(Vec3::new(0.0, 0.0, 1.0));
    let color = sh_to_color(&pg.sh, dir);
    Some(Contribution { rho2, alpha, depth, color, source: pg.index })
}

/// Evaluates one Gaussian at the center of pixel `(px, py)`.
pub fn evaluate_pixel(
    pg: &PreparedGaussian,
    camera: &Camera,
    config: &RenderConfig,
    px: u32,
    py: u32,
) -> Option<Contribution> {
    evaluate_at(pg, camera, config, px as f64 + 0.5, py as f64 + 0.5)
}

/// Front-to-back compositing in ascending max-contribution depth, ties broken
/// by source index.
pub fn blend_pixel(contributions: &mut [Contribution], config: &RenderConfig) -> (Vec3, f64) {
    contributions.sort_unstable_by(|a, b| {
        a.depth.total_cmp(&b.depth).then(a.source.cmp(&b.source))
    });
    let mut color = Vec3::ZERO;
    let mut t_acc = 1.0f64;
    for c in contributions.iter() {
        color = color + c.color * (c.alpha * t_acc);
        t_acc *= 1.0 - c.alpha;
        if t_acc < config.transmittance_epsilon {
            break;
        }
    }
    (color + config.background * t_acc, t_acc)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RenderStats {
    pub preprocess: PreprocessStats,
    pub bins: BinStats,
}

/// Renders the scene. Deterministic for fixed inputs regardless of thread
/// count or tile size: binning is sound, so the per-pixel contribution sets
/// and their depth-sorted blends never depend on the tiling.
pub fn render(
    scene: &[Gaussian],
    camera: &Camera,
    config: &RenderConfig,
) -> Result<Framebuffer, ConfigError> {
    render_with_stats(scene, camera, config).map(|(fb, _)| fb)
}

pub fn render_with_stats(
    scene: &[Gaussian],
    camera: &Camera,
    config: &RenderConfig,
) -> Result<(Framebuffer, RenderStats), ConfigError> {
    config.validate()?;
    let (prepared, pre_stats) = preprocess_with_stats(scene, camera, config);
    let (bins, bin_stats) = bin_to_tiles(&prepared, camera, config);

    let tile_count = bins.tiles_x * bins.tiles_y;
    let tiles: Vec<Vec<(u32, u32, Vec3, f64)>> = (0..tile_count)
        .into_par_iter()
        .map(|ti| {
            let tx = ti % bins.tiles_x;
            let ty = ti / bins.tiles_x;
            let (x0, x1, y0, y1) = bins.tile_bounds(tx, ty, camera);
            let list = &bins.lists[ti];
            let mut out = Vec::with_capacity(((x1 - x0) * (y1 - y0)) as usize);
            let mut contribs: Vec<Contribution> = Vec::new();
            for py in y0 as u32..y1 as u32 {
                for px in x0 as u32..x1 as u32 {
                    contribs.clear();
                    for &pi in list {
                        if let Some(c) = evaluate_pixel(&prepared[pi], camera, config, px, py) {
                            contribs.push(c);
                        }
                    }
                    let (rgb, t) = blend_pixel(&mut contribs, config);
                    out.push((px, py, rgb, t));
                }
            }
            out
        })
        .collect();

    let mut fb = Framebuffer::new(camera.width, camera.height);
    for tile in tiles {
        for (px, py, rgb, t) in tile {
            fb.set_pixel(px, py, rgb, t);
        }
    }
    Ok((fb, RenderStats { preprocess: pre_stats, bins: bin_stats }))
}

//! Exact 3D frustum culling via max-contribution search in Gaussian unit
//! space.
//!
//! A tile or viewport frustum is described by screen-aligned planes. Pulled
//! into a Gaussian's unit space (plane pullback is exact under any projective
//! map), the point of maximum contribution inside the frustum is the point
//! closest to the unit-space origin, found on the frustum's faces and edges.
//! A Gaussian/tile pair is culled when that minimum squared distance reaches
//! the cutoff `tau_rho`.

use crate::camera::{Camera, GaussianFrame};
use crate::math::{Mat3, Mat4, Plane, Vec3};

/// Slack for half-space admissibility checks, measured as a signed distance
/// in unit space. Keeps candidates on shared edges from flickering.
const ADMISSIBILITY_SLACK: f64 = 1e-9;

/// Squared cross-product threshold below which two plane normals count as
/// parallel.
const PARALLEL_EPS2: f64 = 1e-24;

/// Screen-aligned frustum: four pixel-coordinate planes, optionally closed by
/// the near plane in view space.
///
/// Plane orientation: the interior satisfies plane value >= 0 (for points in
/// front of the camera).
#[derive(Clone, Copy, Debug)]
pub struct Frustum {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// View-space depth of the near plane, when part of the frustum.
    pub near: Option<f64>,
}

impl Frustum {
    pub fn tile(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        debug_assert!(x_min < x_max && y_min < y_max);
        Frustum { x_min, x_max, y_min, y_max, near: None }
    }

    /// Whole-viewport frustum including the near plane.
    pub fn full_viewport(camera: &Camera) -> Self {
        Frustum {
            x_min: 0.0,
            x_max: camera.width as f64,
            y_min: 0.0,
            y_max: camera.height as f64,
            near: Some(camera.near),
        }
    }

    pub fn with_near(mut self, near: f64) -> Self {
        self.near = Some(near);
        self
    }

    /// The four screen planes in pixel-homogeneous coordinates.
    pub fn pixel_planes(&self) -> [Plane; 4] {
        [
            Plane::new(1.0, 0.0, 0.0, -self.x_min),
            Plane::new(-1.0, 0.0, 0.0, self.x_max),
            Plane::new(0.0, 1.0, 0.0, -self.y_min),
            Plane::new(0.0, -1.0, 0.0, self.y_max),
        ]
    }

    /// Near plane in view space, when present.
    pub fn near_plane(&self) -> Option<Plane> {
        self.near.map(|n| Plane::new(0.0, 0.0, 1.0, -n))
    }

    fn contains_pixel(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }
}

/// Exact plane pullback `M^T pi`: if `M` maps space A to space B, a plane
/// given in B coordinates is expressed in A coordinates.
pub fn transform_plane(m: &Mat4, plane: &Plane) -> Plane {
    Plane(m.transpose_mul_vec4(plane.0))
}

/// Closest point of a plane to the origin and its squared distance.
pub fn closest_point_on_plane(plane: &Plane) -> Option<(Vec3, f64)> {
    let n = plane.normal();
    let n2 = n.norm_squared();
    if n2 < PARALLEL_EPS2 {
        return None;
    }
    let d = plane.offset();
    Some((n * (-d / n2), d * d / n2))
}

/// Least-norm point on the intersection line of two planes.
///
/// Solves `min |u|^2` subject to both plane equations; `None` when the
/// normals are parallel.
pub fn closest_point_on_line(a: &Plane, b: &Plane) -> Option<(Vec3, f64)> {
    let na = a.normal();
    let nb = b.normal();
    let gaa = na.dot(na);
    let gab = na.dot(nb);
    let gbb = nb.dot(nb);
    // det(A A^T) equals |na x nb|^2.
    let det = gaa * gbb - gab * gab;
    if det < PARALLEL_EPS2 || !det.is_finite() {
        return None;
    }
    let ba = -a.offset();
    let bb = -b.offset();
    let l1 = (gbb * ba - gab * bb) / det;
    let l2 = (gaa * bb - gab * ba) / det;
    let u = na * l1 + nb * l2;
    Some((u, u.norm_squared()))
}

/// Result of the max-contribution search inside a frustum.
#[derive(Clone, Copy, Debug)]
pub struct MaxContribution {
    /// Minimum squared Mahalanobis distance over the frustum.
    pub rho2: f64,
    /// Arg-min in Gaussian unit space.
    pub point_unit: Vec3,
    /// Whether any admissible candidate in front of the camera exists.
    pub valid: bool,
}

impl MaxContribution {
    const NONE: MaxContribution = MaxContribution {
        rho2: f64::INFINITY,
        point_unit: Vec3::ZERO,
        valid: false,
    };

    fn at_mean() -> MaxContribution {
        MaxContribution { rho2: 0.0, point_unit: Vec3::ZERO, valid: true }
    }
}

/// All frustum constraints pulled into unit space.
struct UnitConstraints {
    planes: [Plane; 5],
    len: usize,
}

impl UnitConstraints {
    fn build(frame: &GaussianFrame, frustum: &Frustum) -> Self {
        let px = frustum.pixel_planes();
        let mut planes = [Plane::new(0.0, 0.0, 0.0, 0.0); 5];
        for (dst, p) in planes.iter_mut().zip(px.iter()) {
            *dst = transform_plane(&frame.t_prime, p);
        }
        let mut len = 4;
        if let Some(nearp) = frustum.near_plane() {
            planes[4] = transform_plane(&frame.t_view, &nearp);
            len = 5;
        }
        UnitConstraints { planes, len }
    }

    fn planes(&self) -> &[Plane] {
        &self.planes[..self.len]
    }

    /// Admissible: in front of the camera and inside every half space
    /// (checked with slack, for points in front the pulled plane sign equals
    /// the pixel-space sign).
    fn admissible(&self, frame: &GaussianFrame, u: Vec3) -> bool {
        if frame.view_depth(u) <= 0.0 {
            return false;
        }
        self.planes().iter().all(|p| {
            let n = p.normal().norm();
            p.eval(u) >= -ADMISSIBILITY_SLACK * n.max(f64::MIN_POSITIVE)
        })
    }
}

fn consider(best: &mut MaxContribution, frame: &GaussianFrame, cons: &UnitConstraints, u: Vec3, rho2: f64) {
    if rho2 < best.rho2 && cons.admissible(frame, u) {
        *best = MaxContribution { rho2, point_unit: u, valid: true };
    }
}

/// Intersection point of three unit-space planes (frustum vertex).
fn three_plane_point(a: &Plane, b: &Plane, c: &Plane) -> Option<Vec3> {
    let m = Mat3::from_rows(
        [a.0.x, a.0.y, a.0.z],
        [b.0.x, b.0.y, b.0.z],
        [c.0.x, c.0.y, c.0.z],
    );
    let rhs = Vec3::new(-a.offset(), -b.offset(), -c.offset());
    m.inverse().map(|inv| inv.mul_vec(rhs))
}

fn mean_inside(frame: &GaussianFrame, frustum: &Frustum) -> bool {
    let Some(screen) = frame.mean_screen else { return false };
    if !frustum.contains_pixel(screen) {
        return false;
    }
    match frustum.near {
        Some(near) => frame.mean_view.z >= near,
        None => true,
    }
}

/// Exhaustive search over every face, edge and vertex of the frustum.
///
/// Used for the naive 4-plane/4-edge tile search and for near-plane-closed
/// frusta (whole view frustum), where the candidate set additionally contains
/// the near-plane edges and corner vertices.
pub fn min_rho2_naive(frame: &GaussianFrame, frustum: &Frustum) -> MaxContribution {
    if mean_inside(frame, frustum) {
        return MaxContribution::at_mean();
    }
    let cons = UnitConstraints::build(frame, frustum);
    let planes = cons.planes();
    let mut best = MaxContribution::NONE;
    for p in planes {
        if let Some((u, rho2)) = closest_point_on_plane(p) {
            consider(&mut best, frame, &cons, u, rho2);
        }
    }
    // Adjacent pixel-plane pairs: (x0,y0) (x0,y1) (x1,y0) (x1,y1).
    for xi in 0..2 {
        for yi in 2..4 {
            if let Some((u, rho2)) = closest_point_on_line(&planes[xi], &planes[yi]) {
                consider(&mut best, frame, &cons, u, rho2);
            }
        }
    }
    if cons.len == 5 {
        let near = &planes[4];
        for side in planes.iter().take(4) {
            if let Some((u, rho2)) = closest_point_on_line(side, near) {
                consider(&mut best, frame, &cons, u, rho2);
            }
        }
        // Frustum corners on the near plane.
        for xi in 0..2 {
            for yi in 2..4 {
                if let Some(u) = three_plane_point(&planes[xi], &planes[yi], near) {
                    consider(&mut best, frame, &cons, u, u.norm_squared());
                }
            }
        }
    }
    best
}

/// Max-contribution search limited to the one vertical and one horizontal
/// plane nearest the mean's screen position, plus the three edges those
/// planes participate in.
///
/// Requires the mean in front of the camera; callers fall back to
/// [`min_rho2_naive`] otherwise. Matches the naive search exactly: the
/// minimizer lies on a rect side whose half-plane constraint the mean
/// violates (sub-level sets of the per-pixel minimum are convex), and those
/// sides and their corners are always selected.
pub fn min_rho2_optimized(frame: &GaussianFrame, frustum: &Frustum) -> MaxContribution {
    debug_assert!(frustum.near.is_none(), "optimized search handles 4-plane frusta");
    let Some(screen) = frame.mean_screen else {
        return min_rho2_naive(frame, frustum);
    };
    if mean_inside(frame, frustum) {
        return MaxContribution::at_mean();
    }
    let cons = UnitConstraints::build(frame, frustum);
    let planes = cons.planes();
    let sel_x = if (screen[0] - frustum.x_min).abs() <= (screen[0] - frustum.x_max).abs() {
        0
    } else {
        1
    };
    let sel_y = if (screen[1] - frustum.y_min).abs() <= (screen[1] - frustum.y_max).abs() {
        2
    } else {
        3
    };
    let other_x = 1 - sel_x;
    let other_y = 5 - sel_y;
    let mut best = MaxContribution::NONE;
    for idx in [sel_x, sel_y] {
        if let Some((u, rho2)) = closest_point_on_plane(&planes[idx]) {
            consider(&mut best, frame, &cons, u, rho2);
        }
    }
    for (a, b) in [(sel_x, sel_y), (sel_x, other_y), (other_x, sel_y)] {
        if let Some((u, rho2)) = closest_point_on_line(&planes[a], &planes[b]) {
            consider(&mut best, frame, &cons, u, rho2);
        }
    }
    best
}

/// Production dispatch: exhaustive for near-closed frusta, 2-plane/3-edge
/// otherwise.
pub fn min_rho2_in_frustum(frame: &GaussianFrame, frustum: &Frustum) -> MaxContribution {
    if frustum.near.is_some() {
        min_rho2_naive(frame, frustum)
    } else {
        min_rho2_optimized(frame, frustum)
    }
}

/// Largest view-space depth reached by the cutoff ellipsoid.
pub fn max_ellipsoid_depth(frame: &GaussianFrame, tau_rho: f64) -> f64 {
    let row = frame.t_view.row(2).xyz();
    frame.mean_view.z + tau_rho.sqrt() * row.norm()
}

/// Tile culling decision; `true` keeps the pair.
///
/// Callers must have discarded camera-inside Gaussians (the bounding stage
/// does): with the camera outside the cutoff ellipsoid, an inadmissible
/// candidate set implies the frustum minimum sits at the apex with
/// `rho^2 >= tau_rho`, so culling stays sound. A tile whose entire cutoff
/// ellipsoid stays closer than the near plane can never produce an accepted
/// contribution and is culled as well; with `tile_near_plane` the near plane
/// joins the frustum instead and the depth rule is implicit.
pub fn tile_cull(
    frame: &GaussianFrame,
    tile: &Frustum,
    tau_rho: f64,
    camera_near: f64,
    tile_near_plane: bool,
) -> bool {
    let frustum = if tile_near_plane { tile.with_near(camera_near) } else { *tile };
    if frustum.near.is_none() && max_ellipsoid_depth(frame, tau_rho) <= camera_near {
        return false;
    }
    let mc = min_rho2_in_frustum(frame, &frustum);
    mc.valid && mc.rho2 < tau_rho
}

/// Whole-view-frustum culling during preprocessing; `true` keeps the
/// Gaussian. The frustum includes the near plane, and Gaussians whose mean is
/// behind the camera are kept whenever their ellipsoid still reaches into the
/// frustum.
pub fn cull_view_frustum(frame: &GaussianFrame, camera: &Camera, tau_rho: f64) -> bool {
    let mc = min_rho2_naive(frame, &Frustum::full_viewport(camera));
    mc.valid && mc.rho2 < tau_rho
}

/// Frustum test for a single view-space point (used for the training-camera
/// visibility rule).
pub fn view_frustum_contains_point(camera: &Camera, view: Vec3) -> bool {
    if view.z < camera.near {
        return false;
    }
    match camera.project_view(view) {
        Some([px, py]) => {
            px >= 0.0 && px <= camera.width as f64 && py >= 0.0 && py <= camera.height as f64
        }
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn identity_camera(width: u32, height: u32, f: f64) -> Camera {
        Camera::new(width, height, f, f, width as f64 / 2.0, height as f64 / 2.0, 0.01, Mat4::IDENTITY)
            .unwrap()
    }

    fn random_rotation(rng: &mut impl Rng) -> Mat3 {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let u3: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        crate::math::Quat::new(a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos()).to_mat3()
    }

    /// Independent per-ray Mahalanobis minimum in view space, from the
    /// explicit inverse covariance. `clamp_front` restricts to t >= 0.
    fn ray_min_rho2(frame: &GaussianFrame, cam: &Camera, px: f64, py: f64, clamp_front: bool) -> (f64, f64) {
        let a = frame.t_view.linear();
        let cov = a * a.transpose();
        let m = cov.inverse().unwrap();
        let v = Vec3::new((px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0);
        let mu = frame.mean_view;
        let mut t = v.dot(m.mul_vec(mu)) / v.dot(m.mul_vec(v));
        if clamp_front && t < 0.0 {
            t = 0.0;
        }
        let diff = v * t - mu;
        (diff.dot(m.mul_vec(diff)), t)
    }

    fn grid_min_rho2(frame: &GaussianFrame, cam: &Camera, tile: &Frustum, step: f64) -> f64 {
        let mut best = f64::INFINITY;
        let mut x = tile.x_min;
        while x <= tile.x_max {
            let mut y = tile.y_min;
            while y <= tile.y_max {
                best = best.min(ray_min_rho2(frame, cam, x, y, true).0);
                y += step;
            }
            x += step;
        }
        best
    }

    #[test]
    fn transform_plane_identity() {
        let p = Plane::new(0.3, -0.5, 0.8, 1.7);
        assert_eq!(transform_plane(&Mat4::IDENTITY, &p), p);
    }

    #[test]
    fn transform_plane_translation_shifts_offset() {
        let t = Vec3::new(1.0, -2.0, 3.0);
        let m = Mat4::from_linear_translation(&Mat3::IDENTITY, t);
        let p = Plane::new(0.3, -0.5, 0.8, 1.7);
        let q = transform_plane(&m, &p);
        assert_eq!(q.normal(), p.normal());
        assert_relative_eq!(q.offset(), p.offset() + p.normal().dot(t), epsilon = 1e-12);
    }

    #[test]
    fn transform_plane_substitution_oracle() {
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..100 {
            let mut m = Mat4::IDENTITY;
            for row in &mut m.m {
                for v in row.iter_mut() {
                    *v = rng.gen_range(-2.0..2.0);
                }
            }
            if m.inverse().is_none() {
                continue;
            }
            let p = Plane::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if p.normal().norm() < 0.1 {
                continue;
            }
            let pulled = transform_plane(&m, &p);
            // Point on the pulled plane: foot plus in-plane offsets.
            let Some((foot, _)) = closest_point_on_plane(&pulled) else { continue };
            let basis = crate::math::orthonormal_basis(pulled.normal().try_normalized().unwrap());
            let x = foot + basis.col(1) * rng.gen_range(-2.0..2.0) + basis.col(2) * rng.gen_range(-2.0..2.0);
            assert_relative_eq!(pulled.eval(x), 0.0, epsilon = 1e-9);
            let mapped = m.mul_vec4(x.extend(1.0));
            assert_relative_eq!(p.0.dot(mapped), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn closest_point_on_plane_examples() {
        let (u, rho2) = closest_point_on_plane(&Plane::new(1.0, 0.0, 0.0, -2.0)).unwrap();
        assert_eq!(u, Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(rho2, 4.0);
        let (_, rho2) = closest_point_on_plane(&Plane::new(0.3, 0.4, -0.2, 0.0)).unwrap();
        assert_eq!(rho2, 0.0);
        assert!(closest_point_on_plane(&Plane::new(0.0, 0.0, 0.0, 1.0)).is_none());
    }

    #[test]
    fn closest_point_on_plane_beats_sampled_points() {
        let mut rng = StdRng::seed_from_u64(15);
        let p = Plane::new(0.4, -1.2, 0.7, 2.3);
        let (u, rho2) = closest_point_on_plane(&p).unwrap();
        assert_relative_eq!(p.eval(u), 0.0, epsilon = 1e-12);
        let basis = crate::math::orthonormal_basis(p.normal().try_normalized().unwrap());
        for _ in 0..100_000 {
            let s = u + basis.col(1) * rng.gen_range(-10.0..10.0) + basis.col(2) * rng.gen_range(-10.0..10.0);
            assert!(s.norm_squared() >= rho2 - 1e-12);
        }
    }

    #[test]
    fn closest_point_on_line_examples() {
        let (u, rho2) = closest_point_on_line(
            &Plane::new(1.0, 0.0, 0.0, 0.0),
            &Plane::new(0.0, 1.0, 0.0, 0.0),
        )
        .unwrap();
        assert_eq!(rho2, 0.0);
        assert_eq!(u, Vec3::ZERO);

        let (u, rho2) = closest_point_on_line(
            &Plane::new(1.0, 0.0, 0.0, -3.0),
            &Plane::new(0.0, 1.0, 0.0, -4.0),
        )
        .unwrap();
        assert_eq!(u, Vec3::new(3.0, 4.0, 0.0));
        assert_eq!(rho2, 25.0);

        assert!(closest_point_on_line(
            &Plane::new(1.0, 0.0, 0.0, 0.0),
            &Plane::new(2.0, 0.0, 0.0, -1.0),
        )
        .is_none());
    }

    #[test]
    fn closest_point_on_line_beats_constrained_samples() {
        let mut rng = StdRng::seed_from_u64(16);
        for _ in 0..200 {
            let a = Plane::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-2.0..2.0),
            );
            let b = Plane::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-2.0..2.0),
            );
            let Some((u, rho2)) = closest_point_on_line(&a, &b) else { continue };
            assert_relative_eq!(a.eval(u), 0.0, epsilon = 1e-9);
            assert_relative_eq!(b.eval(u), 0.0, epsilon = 1e-9);
            let dir = a.normal().cross(b.normal()).try_normalized().unwrap();
            for _ in 0..100 {
                let s = u + dir * rng.gen_range(-5.0..5.0);
                assert!(s.norm_squared() >= rho2 - 1e-9);
            }
        }
    }

    #[test]
    fn mean_inside_tile_is_trivial_minimum() {
        let cam = identity_camera(64, 64, 64.0);
        let frame = GaussianFrame::new(&cam, &Mat3::IDENTITY, Vec3::splat(1.0), Vec3::new(0.0, 0.0, 5.0));
        let tile = Frustum::tile(24.0, 40.0, 24.0, 40.0);
        let mc = min_rho2_in_frustum(&frame, &tile);
        assert!(mc.valid);
        assert_eq!(mc.rho2, 0.0);
    }

    #[test]
    fn shifted_tile_matches_grid_search() {
        // Isotropic Gaussian at depth 5; a tile 10 projected sigma away
        // (small-angle regime) should see rho^2 around 100.
        let cam = identity_camera(256, 256, 1000.0);
        let sigma = 0.01;
        let frame = GaussianFrame::new(&cam, &Mat3::IDENTITY, Vec3::splat(sigma), Vec3::new(0.0, 0.0, 5.0));
        let sigma_px = 1000.0 * sigma / 5.0;
        let x0 = 128.0 + 10.0 * sigma_px;
        let tile = Frustum::tile(x0, x0 + 16.0, 120.0, 136.0);
        let mc = min_rho2_in_frustum(&frame, &tile);
        assert!(mc.valid);
        assert!((mc.rho2 - 100.0).abs() / 100.0 < 0.05, "rho2 = {}", mc.rho2);
        let grid = grid_min_rho2(&frame, &cam, &tile, 0.25);
        assert_relative_eq!(mc.rho2, grid, max_relative = 1e-3);

        // Tile fully containing the projection: trivial minimum.
        let central = Frustum::tile(120.0, 136.0, 120.0, 136.0);
        let mc = min_rho2_in_frustum(&frame, &central);
        assert!(mc.valid);
        assert_eq!(mc.rho2, 0.0);
    }

    fn random_frame(rng: &mut impl Rng, cam: &Camera, tau_rho: f64) -> GaussianFrame {
        loop {
            let scale = Vec3::new(
                10f64.powf(rng.gen_range(-2.0..0.5)),
                10f64.powf(rng.gen_range(-2.0..0.5)),
                10f64.powf(rng.gen_range(-2.0..0.5)),
            );
            let rot = random_rotation(rng);
            let mean = Vec3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-1.0..8.0),
            );
            let frame = GaussianFrame::new(cam, &rot, scale, mean);
            // Match the preprocessing guarantee: camera outside the ellipsoid.
            if frame.camera_in_unit_space().norm_squared() >= tau_rho {
                return frame;
            }
        }
    }

    #[test]
    fn optimized_matches_naive_search() {
        let cam = identity_camera(128, 128, 96.0);
        let tau = 9.0;
        let mut rng = StdRng::seed_from_u64(33);
        for _ in 0..2000 {
            let frame = random_frame(&mut rng, &cam, tau);
            let x0 = rng.gen_range(0.0..112.0);
            let y0 = rng.gen_range(0.0..112.0);
            let tile = Frustum::tile(x0, x0 + 16.0, y0, y0 + 16.0);
            let a = min_rho2_optimized(&frame, &tile);
            let b = min_rho2_naive(&frame, &tile);
            assert_eq!(a.valid, b.valid, "validity mismatch");
            if a.valid {
                assert_relative_eq!(a.rho2, b.rho2, max_relative = 1e-9, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn tile_cull_never_drops_contributing_tiles() {
        let cam = identity_camera(64, 64, 48.0);
        let tau = 9.0;
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..400 {
            let frame = random_frame(&mut rng, &cam, tau);
            let ts = 16.0;
            let tx = rng.gen_range(0..4) as f64 * ts;
            let ty = rng.gen_range(0..4) as f64 * ts;
            let tile = Frustum::tile(tx, tx + ts, ty, ty + ts);
            if tile_cull(&frame, &tile, tau, cam.near, false) {
                continue;
            }
            // Culled: no pixel center in the tile may carry an accepted
            // contribution (front of near plane, inside the cutoff).
            let mut x = tile.x_min + 0.5;
            while x < tile.x_max {
                let mut y = tile.y_min + 0.5;
                while y < tile.y_max {
                    let (rho2, t) = ray_min_rho2(&frame, &cam, x, y, false);
                    if t > cam.near {
                        assert!(
                            rho2 >= tau - 1e-6,
                            "culled tile contains accepted pixel ({x},{y}) rho2={rho2}"
                        );
                    }
                    y += 1.0;
                }
                x += 1.0;
            }
        }
    }

    #[test]
    fn tile_cull_keeps_contained_gaussian_and_culls_far_one() {
        let cam = identity_camera(64, 64, 48.0);
        let tau = 9.0;
        // Projected sigma well under a pixel: entirely inside the central tile.
        let inside = GaussianFrame::new(&cam, &Mat3::IDENTITY, Vec3::splat(0.01), Vec3::new(0.0, 0.0, 5.0));
        let tile = Frustum::tile(24.0, 40.0, 24.0, 40.0);
        assert!(tile_cull(&inside, &tile, tau, cam.near, false));

        // 20 sigma off the tile: cull, and the grid search agrees.
        let off = GaussianFrame::new(
            &cam,
            &Mat3::IDENTITY,
            Vec3::splat(0.05),
            Vec3::new(5.0 * (40.0 - 32.0 + 20.0 * 0.48) / 48.0, 0.0, 5.0),
        );
        let off_tile = Frustum::tile(24.0, 40.0, 24.0, 40.0);
        if tile_cull(&off, &off_tile, tau, cam.near, false) {
            panic!("expected cull");
        }
        assert!(grid_min_rho2(&off, &cam, &off_tile, 0.5) >= tau);
    }

    #[test]
    fn tile_cull_near_plane_rule() {
        let cam = identity_camera(64, 64, 48.0);
        // Whole ellipsoid closer than the near plane.
        let frame = GaussianFrame::new(
            &cam,
            &Mat3::IDENTITY,
            Vec3::splat(1e-4),
            Vec3::new(0.0, 0.0, 0.005),
        );
        let tile = Frustum::tile(24.0, 40.0, 24.0, 40.0);
        assert!(max_ellipsoid_depth(&frame, 9.0) < cam.near);
        assert!(!tile_cull(&frame, &tile, 9.0, cam.near, false));
        // The 5-plane variant agrees.
        assert!(!tile_cull(&frame, &tile, 9.0, cam.near, true));
    }

    #[test]
    fn view_frustum_keeps_onscreen_gaussian() {
        let cam = identity_camera(64, 64, 48.0);
        let frame = GaussianFrame::new(&cam, &Mat3::IDENTITY, Vec3::splat(0.3), Vec3::new(0.0, 0.0, 4.0));
        assert!(cull_view_frustum(&frame, &cam, 9.0));
    }

    #[test]
    fn view_frustum_keeps_gaussian_behind_camera_with_reach() {
        // Mean one unit behind the camera, filtered std sqrt(5): the cutoff
        // ellipsoid pierces the frustum, so the Gaussian must be kept.
        let cam = identity_camera(64, 64, 48.0);
        let frame = GaussianFrame::new(
            &cam,
            &Mat3::IDENTITY,
            Vec3::splat(5.0f64.sqrt()),
            Vec3::new(0.0, 0.0, -1.0),
        );
        assert!(cull_view_frustum(&frame, &cam, 9.0));
        // Grid oracle over the frustum (rays clamped to the near plane):
        // some pixel reaches rho^2 below tau.
        let a = frame.t_view.linear();
        let m = (a * a.transpose()).inverse().unwrap();
        let mut best = f64::INFINITY;
        for px in 0..64 {
            for py in 0..64 {
                let v = Vec3::new((px as f64 + 0.5 - cam.cx) / cam.fx, (py as f64 + 0.5 - cam.cy) / cam.fy, 1.0);
                let t = (v.dot(m.mul_vec(frame.mean_view)) / v.dot(m.mul_vec(v))).max(cam.near);
                let diff = v * t - frame.mean_view;
                best = best.min(diff.dot(m.mul_vec(diff)));
            }
        }
        assert!(best < 9.0, "frustum grid minimum {best} not below tau");
    }

    #[test]
    fn view_frustum_culls_far_offaxis_gaussian() {
        let cam = identity_camera(64, 64, 48.0);
        let sigma = 0.05;
        let frame = GaussianFrame::new(
            &cam,
            &Mat3::IDENTITY,
            Vec3::splat(sigma),
            Vec3::new(100.0 * sigma + 5.0, 0.0, 5.0),
        );
        assert!(!cull_view_frustum(&frame, &cam, 9.0));
        let full = Frustum::tile(0.0, 64.0, 0.0, 64.0);
        assert!(grid_min_rho2(&frame, &cam, &full, 1.0) >= 9.0);
    }

    #[test]
    fn enlarging_tile_never_increases_minimum() {
        let cam = identity_camera(128, 128, 96.0);
        let tau = 9.0;
        let mut rng = StdRng::seed_from_u64(47);
        for _ in 0..300 {
            let frame = random_frame(&mut rng, &cam, tau);
            let x0 = rng.gen_range(8.0..96.0);
            let y0 = rng.gen_range(8.0..96.0);
            let small = Frustum::tile(x0, x0 + 8.0, y0, y0 + 8.0);
            let big = Frustum::tile(x0 - 8.0, x0 + 16.0, y0 - 8.0, y0 + 16.0);
            let a = min_rho2_in_frustum(&frame, &small);
            let b = min_rho2_in_frustum(&frame, &big);
            if a.valid {
                assert!(b.valid);
                assert!(b.rho2 <= a.rho2 + 1e-9);
            }
        }
    }

    #[test]
    fn frustum_point_test() {
        let cam = identity_camera(64, 64, 48.0);
        assert!(view_frustum_contains_point(&cam, Vec3::new(0.0, 0.0, 1.0)));
        assert!(!view_frustum_contains_point(&cam, Vec3::new(0.0, 0.0, -1.0)));
        assert!(!view_frustum_contains_point(&cam, Vec3::new(5.0, 0.0, 1.0)));
        assert!(!view_frustum_contains_point(&cam, Vec3::new(0.0, 0.0, 0.001)));
    }
}

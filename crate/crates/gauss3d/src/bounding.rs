//! Perspective-correct screen bounds from tangent planes to the cutoff
//! ellipsoid, computed in view space.
//!
//! For each screen axis we fit planes through the camera center that touch
//! the ellipsoid `rho^2 = tau_rho`: `pi_theta = (cos t, 0, -sin t, 0)` for the
//! x axis and `pi_phi = (0, cos p, -sin p, 0)` for the y axis. Pulling a plane
//! into the Gaussian's unit space via `T_view^T` turns the touching condition
//! into a quadratic in `tan`, whose coefficients are inner products of the
//! rows of `T_view`. The angular solutions survive Gaussians that reach
//! behind the image plane, which screen-space plane fitting does not.

use crate::camera::{Camera, GaussianFrame};
use crate::math::Mat4;

/// Threshold below which the quadratic in `tan` degenerates to linear and the
/// axis conservatively covers the whole screen.
const DEGENERATE_S33: f64 = 1e-12;

/// Angular extent of one screen axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AxisBounds {
    /// Closed angular interval, both ends in `[-(pi/2 - eps), pi/2 - eps]`.
    Range(f64, f64),
    /// Unboundable axis (the ellipsoid crosses the axis all planes share).
    Full,
    /// No on-screen extent, or the camera center is inside the ellipsoid.
    Invalid,
}

/// Angular bounds of one Gaussian: `theta` bounds the screen x axis, `phi`
/// the screen y axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngularBounds {
    pub theta: AxisBounds,
    pub phi: AxisBounds,
}

impl AngularBounds {
    pub const INVALID: AngularBounds = AngularBounds {
        theta: AxisBounds::Invalid,
        phi: AxisBounds::Invalid,
    };

    pub fn is_invalid(&self) -> bool {
        matches!(self.theta, AxisBounds::Invalid) || matches!(self.phi, AxisBounds::Invalid)
    }
}

/// Axis-aligned screen-space rectangle in continuous pixel coordinates,
/// clipped to the viewport.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScreenRect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl ScreenRect {
    pub const EMPTY: ScreenRect = ScreenRect { x_min: 0.0, x_max: 0.0, y_min: 0.0, y_max: 0.0 };

    pub fn is_empty(&self) -> bool {
        !(self.x_min < self.x_max && self.y_min < self.y_max)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    /// Overlap test against another rectangle (closed intervals).
    pub fn overlaps(&self, other: &ScreenRect) -> bool {
        self.x_min <= other.x_max
            && self.x_max >= other.x_min
            && self.y_min <= other.y_max
            && self.y_max >= other.y_min
    }
}

/// Quadric coefficient `s_{i,j} = <t, T_i (.) T_j>` with
/// `t = (tau_rho, tau_rho, tau_rho, -1)` and `T_i` the i-th row (0-based) of
/// the Gaussian-to-view transform.
pub fn quadric_coeff(t_view: &Mat4, i: usize, j: usize, tau_rho: f64) -> f64 {
    let a = t_view.m[i];
    let b = t_view.m[j];
    tau_rho * (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) - a[3] * b[3]
}

/// Roots of `s33 tan^2 - 2 s_a3 tan + s_aa = 0`, evaluated with the usual
/// cancellation-free split. Returns `None` when the discriminant is negative
/// or the quadratic degenerates.
fn tangent_roots(s_aa: f64, s_a3: f64, s_33: f64) -> Option<(f64, f64)> {
    if s_33.abs() < DEGENERATE_S33 {
        return None;
    }
    let disc = s_a3 * s_a3 - s_aa * s_33;
    if disc < 0.0 || !disc.is_finite() {
        return None;
    }
    let sq = disc.sqrt();
    let big = if s_a3 >= 0.0 { s_a3 + sq } else { s_a3 - sq };
    if big == 0.0 {
        // s_a3 = 0 and disc = 0: double root at zero.
        return Some((0.0, 0.0));
    }
    Some((big / s_33, s_aa / big))
}

/// Shifts `angle` by a multiple of pi into `(center - pi, center]`.
fn representative_below(angle: f64, center: f64) -> f64 {
    angle + ((center - angle) / std::f64::consts::PI).floor() * std::f64::consts::PI
}

fn solve_axis(s_aa: f64, s_a3: f64, s_33: f64, angle_mu: f64, epsilon: f64) -> AxisBounds {
    let pi = std::f64::consts::PI;
    let Some((r1, r2)) = tangent_roots(s_aa, s_a3, s_33) else {
        return AxisBounds::Full;
    };
    let a = representative_below(r1.atan(), angle_mu);
    let b = representative_below(r2.atan(), angle_mu);
    // Two complementary wedges contain the mean angle; the ellipsoid occupies
    // the one narrower than pi (its azimuth arc fits an open half circle).
    let (mut lo, mut hi) = if b + pi - a <= pi { (a, b + pi) } else { (b, a + pi) };
    lo = lo.max(-(pi / 2.0 - epsilon));
    hi = hi.min(pi / 2.0 - epsilon);
    if lo > hi {
        AxisBounds::Invalid
    } else {
        AxisBounds::Range(lo, hi)
    }
}

/// Angular screen bounds of the cutoff ellipsoid `rho^2 = tau_rho`.
///
/// Returns [`AngularBounds::INVALID`] when the camera center lies inside the
/// ellipsoid (no tangent solution exists); a single [`AxisBounds::Invalid`]
/// axis means the Gaussian has no on-screen extent along it.
pub fn angular_bounds(frame: &GaussianFrame, tau_rho: f64, epsilon: f64) -> AngularBounds {
    let cam_unit = frame.camera_in_unit_space();
    if cam_unit.norm_squared() < tau_rho {
        return AngularBounds::INVALID;
    }
    let mu = frame.mean_view;
    let theta_mu = mu.x.atan2(mu.z);
    let phi_mu = mu.y.atan2(mu.z);
    let s00 = quadric_coeff(&frame.t_view, 0, 0, tau_rho);
    let s02 = quadric_coeff(&frame.t_view, 0, 2, tau_rho);
    let s11 = quadric_coeff(&frame.t_view, 1, 1, tau_rho);
    let s12 = quadric_coeff(&frame.t_view, 1, 2, tau_rho);
    let s22 = quadric_coeff(&frame.t_view, 2, 2, tau_rho);
    AngularBounds {
        theta: solve_axis(s00, s02, s22, theta_mu, epsilon),
        phi: solve_axis(s11, s12, s22, phi_mu, epsilon),
    }
}

/// Maps angular bounds to viewport-clipped pixel coordinates:
/// `x = fx tan(theta) + cx`, `y = fy tan(phi) + cy`.
pub fn angles_to_rect(bounds: &AngularBounds, camera: &Camera) -> ScreenRect {
    let w = camera.width as f64;
    let h = camera.height as f64;
    let (x_min, x_max) = match bounds.theta {
        AxisBounds::Range(a, b) => (
            (camera.fx * a.tan() + camera.cx).clamp(0.0, w),
            (camera.fx * b.tan() + camera.cx).clamp(0.0, w),
        ),
        AxisBounds::Full => (0.0, w),
        AxisBounds::Invalid => return ScreenRect::EMPTY,
    };
    let (y_min, y_max) = match bounds.phi {
        AxisBounds::Range(a, b) => (
            (camera.fy * a.tan() + camera.cy).clamp(0.0, h),
            (camera.fy * b.tan() + camera.cy).clamp(0.0, h),
        ),
        AxisBounds::Full => (0.0, h),
        AxisBounds::Invalid => return ScreenRect::EMPTY,
    };
    ScreenRect { x_min, x_max, y_min, y_max }
}

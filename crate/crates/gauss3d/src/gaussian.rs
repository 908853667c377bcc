//! The anisotropic 3D Gaussian scene primitive and its local transforms.

use crate::math::{Mat3, Mat4, Quat, Vec3};
use thiserror::Error;

/// Maximum supported spherical-harmonics degree (16 coefficients per channel).
pub const SH_MAX_DEGREE: usize = 3;
/// Coefficient count for a given degree: `(degree + 1)^2`.
pub const SH_MAX_COEFFS: usize = (SH_MAX_DEGREE + 1) * (SH_MAX_DEGREE + 1);

const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// View-dependent color coefficients, real spherical harmonics per channel.
///
/// `coeffs[i]` is the RGB triple for basis function `i`; only the first
/// `(degree + 1)^2` entries are meaningful.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShCoeffs {
    pub degree: usize,
    pub coeffs: [[f64; 3]; SH_MAX_COEFFS],
}

impl ShCoeffs {
    /// Degree-0 coefficients producing the given base color after the
    /// standard `0.5` offset.
    pub fn from_base_color(rgb: [f64; 3]) -> Self {
        let mut coeffs = [[0.0; 3]; SH_MAX_COEFFS];
        for c in 0..3 {
            coeffs[0][c] = (rgb[c] - 0.5) / SH_C0;
        }
        ShCoeffs { degree: 0, coeffs }
    }

    pub fn new(degree: usize, coeffs: [[f64; 3]; SH_MAX_COEFFS]) -> Self {
        assert!(degree <= SH_MAX_DEGREE);
        ShCoeffs { degree, coeffs }
    }

    pub fn active_len(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }
}

/// Rejected primitive or camera input.
#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("scale must be positive and finite, got ({0}, {1}, {2})")]
    NonPositiveScale(f64, f64, f64),
    #[error("rotation quaternion has zero or non-finite norm")]
    DegenerateRotation,
    #[error("opacity must lie strictly inside (0, 1), got {0}")]
    OpacityOutOfRange(f64),
    #[error("training frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("non-finite value in field {0}")]
    NonFinite(&'static str),
}

/// One anisotropic 3D Gaussian.
///
/// `scale` stores standard deviations (post-activation), `rotation` is a unit
/// quaternion in `(w, x, y, z)` order, and `v_train` is the maximum sampling
/// frequency observed from the training cameras (`f64::INFINITY` when no
/// training cameras constrain it).
#[derive(Clone, Debug)]
pub struct Gaussian {
    pub mean: Vec3,
    pub scale: Vec3,
    pub rotation: Quat,
    pub opacity: f64,
    pub sh: ShCoeffs,
    pub v_train: f64,
}

impl Gaussian {
    /// Validates and normalizes the raw fields. Degenerate inputs are rejected
    /// rather than clamped.
    pub fn new(
        mean: Vec3,
        scale: Vec3,
        rotation: Quat,
        opacity: f64,
        sh: ShCoeffs,
        v_train: f64,
    ) -> Result<Self, ValidationError> {
        if !mean.is_finite() {
            return Err(ValidationError::NonFinite("mean"));
        }
        if !(scale.x > 0.0 && scale.y > 0.0 && scale.z > 0.0 && scale.is_finite()) {
            return Err(ValidationError::NonPositiveScale(scale.x, scale.y, scale.z));
        }
        let rotation = rotation
            .try_normalized()
            .ok_or(ValidationError::DegenerateRotation)?;
        let opacity_ok = opacity > 0.0 && opacity < 1.0;
        if !opacity_ok {
            return Err(ValidationError::OpacityOutOfRange(opacity));
        }
        let v_train_ok = v_train > 0.0;
        if !v_train_ok {
            return Err(ValidationError::NonPositiveFrequency(v_train));
        }
        Ok(Gaussian { mean, scale, rotation, opacity, sh, v_train })
    }

    /// Covariance `Sigma = R S S^T R^T` of this Gaussian.
    pub fn covariance(&self) -> Mat3 {
        covariance(self.scale, self.rotation)
    }

    /// Transform from the Gaussian's unit space (where the density is
    /// `exp(-|u|^2 / 2)`) to world space. `scale_override` substitutes the
    /// filtered standard deviations when the smoothing filter is active.
    pub fn to_world(&self, scale_override: Option<Vec3>) -> Mat4 {
        let s = scale_override.unwrap_or(self.scale);
        let linear = self.rotation.to_mat3().mul_diag(s);
        Mat4::from_linear_translation(&linear, self.mean)
    }

    /// Density at a world point via the explicit inverse covariance.
    ///
    /// Test/oracle path only; the render path never inverts the covariance.
    pub fn density_at(&self, x: Vec3) -> f64 {
        (-0.5 * self.mahalanobis2_at(x)).exp()
    }

    /// Squared Mahalanobis distance `(x - mu)^T Sigma^-1 (x - mu)`.
    pub fn mahalanobis2_at(&self, x: Vec3) -> f64 {
        let diff = x - self.mean;
        let inv = self
            .covariance()
            .inverse()
            .expect("valid Gaussian covariance is invertible");
        diff.dot(inv.mul_vec(diff))
    }
}

/// `Sigma = R S S^T R^T` from scale (standard deviations) and unit rotation.
pub fn covariance(scale: Vec3, rotation: Quat) -> Mat3 {
    let rs = rotation.to_mat3().mul_diag(scale);
    rs * rs.transpose()
}

/// Evaluates the stored spherical harmonics toward `dir` (unit vector from the
/// camera center to the evaluation point), applies the conventional `0.5`
/// offset and clamps to `[0, 1]`.
pub fn sh_to_color(sh: &ShCoeffs, dir: Vec3) -> Vec3 {
    // Per-basis weights up to the stored degree, then one pass over channels.
    let mut basis = [0.0f64; SH_MAX_COEFFS];
    basis[0] = SH_C0;
    let (x, y, z) = (dir.x, dir.y, dir.z);
    if sh.degree >= 1 {
        basis[1] = -SH_C1 * y;
        basis[2] = SH_C1 * z;
        basis[3] = -SH_C1 * x;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    if sh.degree >= 2 {
        basis[4] = SH_C2[0] * xy;
        basis[5] = SH_C2[1] * yz;
        basis[6] = SH_C2[2] * (2.0 * zz - xx - yy);
        basis[7] = SH_C2[3] * xz;
        basis[8] = SH_C2[4] * (xx - yy);
    }
    if sh.degree >= 3 {
        basis[9] = SH_C3[0] * y * (3.0 * xx - yy);
        basis[10] = SH_C3[1] * xy * z;
        basis[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
        basis[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
        basis[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
        basis[14] = SH_C3[5] * z * (xx - yy);
        basis[15] = SH_C3[6] * x * (xx - 3.0 * yy);
    }
    let mut rgb = [0.0f64; 3];
    for (weight, coeff) in basis.iter().zip(sh.coeffs.iter()).take(sh.active_len()) {
        for (out, channel) in rgb.iter_mut().zip(coeff.iter()) {
            *out += weight * channel;
        }
    }
    Vec3::new(
        (rgb[0] + 0.5).clamp(0.0, 1.0),
        (rgb[1] + 0.5).clamp(0.0, 1.0),
        (rgb[2] + 0.5).clamp(0.0, 1.0),
    )
}

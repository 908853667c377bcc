//! CPU tile-based rasterizer for 3D Gaussian point clouds.
//!
//! Gaussians are evaluated exactly in 3D: each pixel ray is the intersection
//! of two screen planes, pulled into the Gaussian's unit space where the
//! least-norm point on the intersection line carries the maximum
//! contribution. On top of that sit an adaptive 3D anti-aliasing filter,
//! perspective-correct view-space bounding, frustum-based tile culling, and
//! exact per-pixel depth-ordered compositing. A brute-force per-pixel
//! reference renderer certifies the optimized pipeline.

pub mod bounding;
pub mod camera;
pub mod culling;
pub mod filter;
pub mod gaussian;
pub mod io;
pub mod math;
pub mod oracle;
pub mod raster;
pub mod synth;

pub use camera::{Camera, GaussianFrame};
pub use gaussian::{Gaussian, ShCoeffs, ValidationError};
pub use math::{Mat3, Mat4, Plane, Quat, Vec3, Vec4};
pub use raster::{Framebuffer, RenderConfig};

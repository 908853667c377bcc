//! Scene and camera ingestion, image output, and image metrics.

pub mod cameras;
pub mod image;
pub mod metrics;
pub mod ply;

pub use cameras::{load_cameras, write_cameras, CameraEntry, CameraSet};
pub use image::{load_float_image, load_png, write_float_image, write_png, FloatImage};
pub use metrics::psnr;
pub use ply::{load_ply, write_ply, SceneFile};

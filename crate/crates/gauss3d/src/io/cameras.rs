//! Camera description files (JSON).
//!
//! Two record shapes are accepted per entry:
//!
//! * the standard 3DGS `cameras.json` record: `id`, `img_name`, `width`,
//!   `height`, `position` (camera center), `rotation` (3x3 camera-to-world),
//!   `fx`, `fy` — converted to a world-to-view transform with the principal
//!   point at the image center;
//! * a minimal explicit record with intrinsics plus a row-major 4x4
//!   `world_to_view`, used by synthetic scenes and tests.

use crate::camera::Camera;
use crate::gaussian::ValidationError;
use crate::math::{Mat3, Mat4, Vec3};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

const DEFAULT_NEAR: f64 = 0.01;

#[derive(Debug, Error)]
pub enum CamerasError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("camera entry {index}: {message}")]
    Entry { index: usize, message: String },
    #[error("camera entry {index}: {source}")]
    Validation { index: usize, source: ValidationError },
    #[error("duplicate camera id {0}")]
    DuplicateId(u64),
}

#[derive(Debug, Clone)]
pub struct CameraEntry {
    pub id: u64,
    pub name: Option<String>,
    pub camera: Camera,
    /// Held-out evaluation camera (not used for training frequencies).
    pub is_test: bool,
}

#[derive(Debug, Default)]
pub struct CameraSet {
    pub entries: Vec<CameraEntry>,
}

impl CameraSet {
    pub fn cameras(&self) -> Vec<Camera> {
        self.entries.iter().map(|e| e.camera.clone()).collect()
    }

    pub fn by_id(&self, id: u64) -> Option<&CameraEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

#[derive(Deserialize, Serialize)]
#[serde(untagged)]
enum CameraRecord {
    Explicit {
        id: u64,
        width: u32,
        height: u32,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        near: f64,
        /// Row-major 4x4.
        world_to_view: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        img_name: Option<String>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        test: bool,
    },
    Standard {
        id: u64,
        width: u32,
        height: u32,
        position: [f64; 3],
        rotation: [[f64; 3]; 3],
        fx: f64,
        fy: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        img_name: Option<String>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        test: bool,
    },
}

fn entry_from_record(index: usize, record: CameraRecord) -> Result<CameraEntry, CamerasError> {
    match record {
        CameraRecord::Explicit { id, width, height, fx, fy, cx, cy, near, world_to_view, img_name, test } => {
            if world_to_view.len() != 16 {
                return Err(CamerasError::Entry {
                    index,
                    message: format!("world_to_view has {} entries, expected 16", world_to_view.len()),
                });
            }
            let mut m = [[0.0; 4]; 4];
            for r in 0..4 {
                for c in 0..4 {
                    m[r][c] = world_to_view[r * 4 + c];
                }
            }
            let camera = Camera::new(width, height, fx, fy, cx, cy, near, Mat4::from_rows(m))
                .map_err(|source| CamerasError::Validation { index, source })?;
            Ok(CameraEntry { id, name: img_name, camera, is_test: test })
        }
        CameraRecord::Standard { id, width, height, position, rotation, fx, fy, img_name, test } => {
            // rotation is camera-to-world; position is the camera center.
            let c2w = Mat3 { m: rotation };
            let w2v_rot = c2w.transpose();
            let center = Vec3::new(position[0], position[1], position[2]);
            let translation = -w2v_rot.mul_vec(center);
            let camera = Camera::new(
                width,
                height,
                fx,
                fy,
                width as f64 * 0.5,
                height as f64 * 0.5,
                DEFAULT_NEAR,
                Mat4::from_linear_translation(&w2v_rot, translation),
            )
            .map_err(|source| CamerasError::Validation { index, source })?;
            Ok(CameraEntry { id, name: img_name, camera, is_test: test })
        }
    }
}

pub fn load_cameras(path: &Path) -> Result<CameraSet, CamerasError> {
    let text = std::fs::read_to_string(path)?;
    let records: Vec<CameraRecord> = serde_json::from_str(&text)?;
    let mut entries = Vec::with_capacity(records.len());
    let mut seen = std::collections::HashSet::new();
    for (index, record) in records.into_iter().enumerate() {
        let entry = entry_from_record(index, record)?;
        if !seen.insert(entry.id) {
            return Err(CamerasError::DuplicateId(entry.id));
        }
        entries.push(entry);
    }
    Ok(CameraSet { entries })
}

/// Writes entries in the explicit (intrinsics + 4x4 view matrix) form.
pub fn write_cameras(path: &Path, entries: &[CameraEntry]) -> Result<(), CamerasError> {
    let records: Vec<CameraRecord> = entries
        .iter()
        .map(|e| CameraRecord::Explicit {
            id: e.id,
            width: e.camera.width,
            height: e.camera.height,
            fx: e.camera.fx,
            fy: e.camera.fy,
            cx: e.camera.cx,
            cy: e.camera.cy,
            near: e.camera.near,
            world_to_view: e
                .camera
                .world_to_view
                .m
                .iter()
                .flat_map(|row| row.iter().copied())
                .collect(),
            img_name: e.name.clone(),
            test: e.is_test,
        })
        .collect();
    let text = serde_json::to_string_pretty(&records)?;
    std::fs::write(path, text)?;
    Ok(())
}

//! Binary little-endian PLY with the standard 3D Gaussian splatting layout.
//!
//! Vertex properties: `x y z [nx ny nz] f_dc_0..2 [f_rest_0..N] opacity
//! scale_0..2 rot_0..3`, all `float`. Stored scales and opacities are raw
//! network outputs; loading applies `exp` to scales and the sigmoid to
//! opacities, and normalizes the `(w, x, y, z)` rotation (`rot_0` = w).

use crate::gaussian::{Gaussian, ShCoeffs, ValidationError, SH_MAX_COEFFS};
use crate::math::{Quat, Vec3};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("header line {line}: {message}")]
    Header { line: usize, message: String },
    #[error("vertex data at byte offset {offset}: {message}")]
    Data { offset: u64, message: String },
    #[error("gaussian {index}: {source}")]
    Validation { index: usize, source: ValidationError },
}

/// A loaded, validated scene.
#[derive(Debug)]
pub struct SceneFile {
    pub gaussians: Vec<Gaussian>,
    pub path: PathBuf,
    pub vertex_count: usize,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

struct Layout {
    stride: usize,
    columns: HashMap<String, usize>,
    rest_count: usize,
}

impl Layout {
    fn column(&self, name: &str) -> Result<usize, PlyError> {
        self.columns.get(name).copied().ok_or_else(|| PlyError::Header {
            line: 0,
            message: format!("missing required property '{name}'"),
        })
    }
}

fn parse_header<R: BufRead>(reader: &mut R) -> Result<(usize, Layout), PlyError> {
    let mut line_no = 0usize;
    let mut read_line = |reader: &mut R| -> Result<String, PlyError> {
        let mut buf = Vec::new();
        reader.read_until(b'\n', &mut buf)?;
        line_no += 1;
        if buf.is_empty() {
            return Err(PlyError::Header { line: line_no, message: "unexpected end of header".into() });
        }
        String::from_utf8(buf).map(|s| s.trim_end().to_string()).map_err(|_| PlyError::Header {
            line: line_no,
            message: "header is not valid UTF-8".into(),
        })
    };

    let magic = read_line(reader)?;
    if magic != "ply" {
        return Err(PlyError::Header { line: 1, message: format!("expected 'ply', got '{magic}'") });
    }
    let format = read_line(reader)?;
    if format != "format binary_little_endian 1.0" {
        return Err(PlyError::Header {
            line: 2,
            message: format!("unsupported format '{format}' (binary_little_endian 1.0 required)"),
        });
    }

    let mut vertex_count: Option<usize> = None;
    let mut columns = HashMap::new();
    let mut stride = 0usize;
    let mut rest_count = 0usize;
    let mut in_vertex_element = false;
    let mut current_line = 2;
    loop {
        let line = read_line(reader)?;
        current_line += 1;
        if line == "end_header" {
            break;
        }
        if line.starts_with("comment") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("element ") {
            let mut parts = rest.split_whitespace();
            let name = parts.next().unwrap_or("");
            let count = parts.next().and_then(|c| c.parse::<usize>().ok());
            if name == "vertex" {
                let count = count.ok_or_else(|| PlyError::Header {
                    line: current_line,
                    message: "element vertex needs a count".into(),
                })?;
                vertex_count = Some(count);
                in_vertex_element = true;
            } else {
                return Err(PlyError::Header {
                    line: current_line,
                    message: format!("unsupported element '{name}'"),
                });
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("property ") {
            if !in_vertex_element {
                return Err(PlyError::Header {
                    line: current_line,
                    message: "property before any element".into(),
                });
            }
            let mut parts = rest.split_whitespace();
            let ty = parts.next().unwrap_or("");
            let name = parts.next().unwrap_or("");
            if !(ty == "float" || ty == "float32") {
                return Err(PlyError::Header {
                    line: current_line,
                    message: format!("property '{name}' has unsupported type '{ty}'"),
                });
            }
            if name.is_empty() {
                return Err(PlyError::Header { line: current_line, message: "unnamed property".into() });
            }
            if columns.insert(name.to_string(), stride).is_some() {
                return Err(PlyError::Header {
                    line: current_line,
                    message: format!("duplicate property '{name}'"),
                });
            }
            if name.starts_with("f_rest_") {
                rest_count += 1;
            }
            stride += 1;
            continue;
        }
        return Err(PlyError::Header {
            line: current_line,
            message: format!("unrecognized header line '{line}'"),
        });
    }
    let vertex_count = vertex_count.ok_or(PlyError::Header {
        line: current_line,
        message: "no 'element vertex' declared".into(),
    })?;
    Ok((vertex_count, Layout { stride, columns, rest_count }))
}

/// Loads and validates a 3DGS point cloud.
pub fn load_ply(path: &Path) -> Result<SceneFile, PlyError> {
    let file = std::fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let (vertex_count, layout) = parse_header(&mut reader)?;

    if !matches!(layout.rest_count, 0 | 9 | 24 | 45) {
        return Err(PlyError::Header {
            line: 0,
            message: format!(
                "f_rest property count {} is not one of 0/9/24/45",
                layout.rest_count
            ),
        });
    }
    let rest_per_channel = layout.rest_count / 3;
    let degree = match rest_per_channel {
        0 => 0,
        3 => 1,
        8 => 2,
        15 => 3,
        _ => unreachable!(),
    };

    let col_xyz = [layout.column("x")?, layout.column("y")?, layout.column("z")?];
    let col_opacity = layout.column("opacity")?;
    let col_scale = [
        layout.column("scale_0")?,
        layout.column("scale_1")?,
        layout.column("scale_2")?,
    ];
    let col_rot = [
        layout.column("rot_0")?,
        layout.column("rot_1")?,
        layout.column("rot_2")?,
        layout.column("rot_3")?,
    ];
    let col_dc: Option<[usize; 3]> = match (
        layout.columns.get("f_dc_0"),
        layout.columns.get("f_dc_1"),
        layout.columns.get("f_dc_2"),
    ) {
        (Some(&a), Some(&b), Some(&c)) => Some([a, b, c]),
        _ => None,
    };
    let mut col_rest = Vec::with_capacity(layout.rest_count);
    for i in 0..layout.rest_count {
        col_rest.push(layout.column(&format!("f_rest_{i}"))?);
    }

    let mut gaussians = Vec::with_capacity(vertex_count);
    let mut row = vec![0f32; layout.stride];
    let mut bytes = vec![0u8; layout.stride * 4];
    let mut offset = 0u64;
    for index in 0..vertex_count {
        reader.read_exact(&mut bytes).map_err(|e| PlyError::Data {
            offset,
            message: format!("vertex {index}: {e}"),
        })?;
        for (i, v) in row.iter_mut().enumerate() {
            *v = f32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap());
        }
        offset += bytes.len() as u64;

        let mean = Vec3::new(row[col_xyz[0]] as f64, row[col_xyz[1]] as f64, row[col_xyz[2]] as f64);
        let scale = Vec3::new(
            (row[col_scale[0]] as f64).exp(),
            (row[col_scale[1]] as f64).exp(),
            (row[col_scale[2]] as f64).exp(),
        );
        let opacity = sigmoid(row[col_opacity] as f64);
        let rotation = Quat::new(
            row[col_rot[0]] as f64,
            row[col_rot[1]] as f64,
            row[col_rot[2]] as f64,
            row[col_rot[3]] as f64,
        );
        let mut coeffs = [[0.0f64; 3]; SH_MAX_COEFFS];
        if let Some(dc) = col_dc {
            for c in 0..3 {
                coeffs[0][c] = row[dc[c]] as f64;
            }
        }
        // f_rest is channel-major: all R coefficients, then G, then B.
        for c in 0..3 {
            for i in 0..rest_per_channel {
                coeffs[1 + i][c] = row[col_rest[c * rest_per_channel + i]] as f64;
            }
        }
        let sh = ShCoeffs::new(degree, coeffs);
        let g = Gaussian::new(mean, scale, rotation, opacity, sh, f64::INFINITY)
            .map_err(|source| PlyError::Validation { index, source })?;
        gaussians.push(g);
    }

    Ok(SceneFile { gaussians, path: path.to_path_buf(), vertex_count })
}

/// Writes a scene in the standard layout (inverse activations applied). The
/// spherical-harmonics degree written is the maximum over the scene.
pub fn write_ply(path: &Path, gaussians: &[Gaussian]) -> Result<(), PlyError> {
    let degree = gaussians.iter().map(|g| g.sh.degree).max().unwrap_or(0);
    let rest_per_channel = (degree + 1) * (degree + 1) - 1;
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);

    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "element vertex {}", gaussians.len())?;
    for name in ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"] {
        writeln!(w, "property float {name}")?;
    }
    for i in 0..rest_per_channel * 3 {
        writeln!(w, "property float f_rest_{i}")?;
    }
    for name in ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"] {
        writeln!(w, "property float {name}")?;
    }
    writeln!(w, "end_header")?;

    let put = |w: &mut BufWriter<std::fs::File>, v: f64| -> Result<(), PlyError> {
        w.write_all(&(v as f32).to_le_bytes())?;
        Ok(())
    };
    for g in gaussians {
        for v in [g.mean.x, g.mean.y, g.mean.z, 0.0, 0.0, 0.0] {
            put(&mut w, v)?;
        }
        for c in 0..3 {
            put(&mut w, g.sh.coeffs[0][c])?;
        }
        for c in 0..3 {
            for i in 0..rest_per_channel {
                put(&mut w, g.sh.coeffs[1 + i][c])?;
            }
        }
        put(&mut w, logit(g.opacity))?;
        for v in [g.scale.x.ln(), g.scale.y.ln(), g.scale.z.ln()] {
            put(&mut w, v)?;
        }
        for v in [g.rotation.w, g.rotation.x, g.rotation.y, g.rotation.z] {
            put(&mut w, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

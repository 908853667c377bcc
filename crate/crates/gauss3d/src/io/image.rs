//! Image output: 8-bit PNG for viewing and a lossless float format for
//! tolerance-critical comparisons.
//!
//! Float format: magic `AAAF`, little-endian `u32` width and height, then
//! row-major `f32` RGB triples. Bit-exact round-trip.

use crate::raster::Framebuffer;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("png error: {0}")]
    Png(#[from] image::ImageError),
    #[error("float image: {0}")]
    Format(String),
}

/// Row-major RGB image with linear f32 channels.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl FloatImage {
    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Largest per-channel absolute difference.
    pub fn max_difference(&self, other: &FloatImage) -> Option<f64> {
        if (self.width, self.height) != (other.width, other.height) {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| (a - b).abs() as f64)
                .fold(0.0, f64::max),
        )
    }
}

impl From<&Framebuffer> for FloatImage {
    fn from(fb: &Framebuffer) -> Self {
        FloatImage {
            width: fb.width,
            height: fb.height,
            data: fb.rgb.iter().map(|&v| v as f32).collect(),
        }
    }
}

fn quantize(c: f64) -> u8 {
    (255.0 * c.clamp(0.0, 1.0)).round() as u8
}

/// 8-bit RGB PNG, linear values mapped by `round(255 * clamp(c, 0, 1))`.
pub fn write_png(fb: &Framebuffer, path: &Path) -> Result<(), ImageIoError> {
    let mut img = image::RgbImage::new(fb.width, fb.height);
    for y in 0..fb.height {
        for x in 0..fb.width {
            let p = fb.pixel(x, y);
            img.put_pixel(x, y, image::Rgb([quantize(p[0]), quantize(p[1]), quantize(p[2])]));
        }
    }
    img.save(path)?;
    Ok(())
}

pub fn load_png(path: &Path) -> Result<FloatImage, ImageIoError> {
    let img = image::open(path)?.to_rgb8();
    let (width, height) = img.dimensions();
    let data = img.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
    Ok(FloatImage { width, height, data })
}

pub fn write_float_image(img: &FloatImage, path: &Path) -> Result<(), ImageIoError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(b"AAAF")?;
    w.write_all(&img.width.to_le_bytes())?;
    w.write_all(&img.height.to_le_bytes())?;
    for v in &img.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_float_image(path: &Path) -> Result<FloatImage, ImageIoError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"AAAF" {
        return Err(ImageIoError::Format(format!("bad magic {magic:?}")));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let width = u32::from_le_bytes(u32buf);
    r.read_exact(&mut u32buf)?;
    let height = u32::from_le_bytes(u32buf);
    let n = width as usize * height as usize * 3;
    let mut data = vec![0f32; n];
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes).map_err(|e| ImageIoError::Format(format!("truncated data: {e}")))?;
    for (i, v) in data.iter_mut().enumerate() {
        *v = f32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap());
    }
    Ok(FloatImage { width, height, data })
}

//! Image comparison metrics.

use super::image::FloatImage;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
pub struct DimensionMismatch(pub u32, pub u32, pub u32, pub u32);

/// Peak signal-to-noise ratio in dB over linear `[0, 1]` channels,
/// `10 log10(1 / MSE)`; positive infinity for identical images.
pub fn psnr(a: &FloatImage, b: &FloatImage) -> Result<f64, DimensionMismatch> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    let mse: f64 = a
        .data
        .iter()
        .zip(b.data.iter())
        .map(|(x, y)| {
            let d = (*x - *y) as f64;
            d * d
        })
        .sum::<f64>()
        / a.data.len() as f64;
    if mse == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (1.0 / mse).log10())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform(width: u32, height: u32, v: f32) -> FloatImage {
        FloatImage { width, height, data: vec![v; (width * height * 3) as usize] }
    }

    #[test]
    fn identical_images_give_infinite_psnr() {
        let a = uniform(4, 4, 0.37);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn unit_difference_is_zero_db() {
        let a = uniform(4, 4, 0.0);
        let b = uniform(4, 4, 1.0);
        assert_relative_eq!(psnr(&a, &b).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tenth_difference_is_twenty_db() {
        let a = uniform(4, 4, 0.4);
        let b = uniform(4, 4, 0.5);
        assert_relative_eq!(psnr(&a, &b).unwrap(), 20.0, epsilon = 1e-5);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = uniform(4, 4, 0.0);
        let b = uniform(4, 5, 0.0);
        assert_eq!(psnr(&a, &b).unwrap_err(), DimensionMismatch(4, 4, 4, 5));
    }
}

//! Orthonormal multi-level 2D Haar transform and the soft-thresholding
//! proximal operator, the pieces behind l1-wavelet regularization.
//!
//! Coefficients are stored in the usual quadrant layout: after each level the
//! approximation block occupies the top-left `m/2 x m/2` corner of the block
//! it refined, so level `l` details live in the three quadrants of size
//! `n >> l`.

use crate::error::{Error, Result};
use crate::geometry::ImageGrid;

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Largest level count such that `2^levels` divides `n`, capped at 4.
pub fn max_levels(n: usize) -> usize {
    let mut levels = 0;
    let mut m = n;
    while levels < 4 && m % 2 == 0 && m > 1 {
        m /= 2;
        levels += 1;
    }
    levels
}

fn check_levels_rect(rows: usize, cols: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::InvalidParameter("levels must be at least 1".into()));
    }
    if levels >= usize::BITS as usize
        || rows % (1usize << levels) != 0
        || cols % (1usize << levels) != 0
    {
        return Err(Error::InvalidParameter(format!(
            "block {rows} x {cols} not divisible by 2^{levels}"
        )));
    }
    Ok(())
}

// One forward level over the leading mr x mc block of a row-major array with
// row stride `stride`: rows then columns.
fn forward_level(data: &mut [f64], stride: usize, mr: usize, mc: usize, scratch: &mut [f64]) {
    let hc = mc / 2;
    for r in 0..mr {
        let row = &mut data[r * stride..r * stride + mc];
        for j in 0..hc {
            let a = row[2 * j];
            let b = row[2 * j + 1];
            scratch[j] = (a + b) * SQRT_HALF;
            scratch[hc + j] = (a - b) * SQRT_HALF;
        }
        row.copy_from_slice(&scratch[..mc]);
    }
    let hr = mr / 2;
    for c in 0..mc {
        for j in 0..hr {
            let a = data[(2 * j) * stride + c];
            let b = data[(2 * j + 1) * stride + c];
            scratch[j] = (a + b) * SQRT_HALF;
            scratch[hr + j] = (a - b) * SQRT_HALF;
        }
        for j in 0..mr {
            data[j * stride + c] = scratch[j];
        }
    }
}

fn inverse_level(data: &mut [f64], stride: usize, mr: usize, mc: usize, scratch: &mut [f64]) {
    let hr = mr / 2;
    for c in 0..mc {
        for j in 0..hr {
            let s = data[j * stride + c];
            let d = data[(hr + j) * stride + c];
            scratch[2 * j] = (s + d) * SQRT_HALF;
            scratch[2 * j + 1] = (s - d) * SQRT_HALF;
        }
        for j in 0..mr {
            data[j * stride + c] = scratch[j];
        }
    }
    let hc = mc / 2;
    for r in 0..mr {
        let row = &mut data[r * stride..r * stride + mc];
        for j in 0..hc {
            let s = row[j];
            let d = row[hc + j];
            scratch[2 * j] = (s + d) * SQRT_HALF;
            scratch[2 * j + 1] = (s - d) * SQRT_HALF;
        }
        row.copy_from_slice(&scratch[..mc]);
    }
}

/// In-place multi-level analysis of a row-major `rows x cols` array.
pub(crate) fn haar_forward_rect(
    data: &mut [f64],
    rows: usize,
    cols: usize,
    levels: usize,
) -> Result<()> {
    check_levels_rect(rows, cols, levels)?;
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "array holds {} values, expected {rows} x {cols}",
            data.len()
        )));
    }
    let mut scratch = vec![0.0; rows.max(cols)];
    for l in 0..levels {
        forward_level(data, cols, rows >> l, cols >> l, &mut scratch);
    }
    Ok(())
}

/// In-place inverse of [`haar_forward_rect`].
pub(crate) fn haar_inverse_rect(
    data: &mut [f64],
    rows: usize,
    cols: usize,
    levels: usize,
) -> Result<()> {
    check_levels_rect(rows, cols, levels)?;
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "array holds {} values, expected {rows} x {cols}",
            data.len()
        )));
    }
    let mut scratch = vec![0.0; rows.max(cols)];
    for l in (0..levels).rev() {
        inverse_level(data, cols, rows >> l, cols >> l, &mut scratch);
    }
    Ok(())
}

/// Multi-level orthonormal 2D Haar analysis. Returns `n*n` coefficients in
/// quadrant layout.
pub fn haar_forward(image: &ImageGrid, levels: usize) -> Result<Vec<f64>> {
    let n = image.size();
    let mut data = image.values().to_vec();
    haar_forward_rect(&mut data, n, n, levels)?;
    Ok(data)
}

/// Inverse of [`haar_forward`]; `coeffs` must hold `n*n` values.
pub fn haar_inverse(coeffs: &[f64], levels: usize) -> Result<ImageGrid> {
    let n = (coeffs.len() as f64).sqrt().round() as usize;
    if n * n != coeffs.len() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient count {} is not a square",
            coeffs.len()
        )));
    }
    let mut data = coeffs.to_vec();
    haar_inverse_rect(&mut data, n, n, levels)?;
    Ok(ImageGrid::from_raw(n, data))
}

/// Soft-thresholding: shrink toward zero by `lambda`, the proximal operator
/// of `lambda * |y|`.
pub fn soft_threshold(y: f64, lambda: f64) -> f64 {
    if y > lambda {
        y - lambda
    } else if y < -lambda {
        y + lambda
    } else {
        0.0
    }
}

/// Applies [`soft_threshold`] to every coefficient in place.
pub fn soft_threshold_slice(coeffs: &mut [f64], lambda: f64) {
    for v in coeffs.iter_mut() {
        *v = soft_threshold(*v, lambda);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(n: usize, seed: u64) -> ImageGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageGrid::from_raw(n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn soft_threshold_matches_formula() {
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
        assert_eq!(soft_threshold(0.4, 0.5), 0.0);
        assert_eq!(soft_threshold(-0.5, 0.5), 0.0);
        assert_eq!(soft_threshold(3.0, 0.0), 3.0);
    }

    #[test]
    fn single_level_matches_hand_oracle() {
        // 2x2 [[a,b],[c,d]] under one orthonormal level
        let (a, b, c, d) = (1.0, 2.0, 3.0, 5.0);
        let img = ImageGrid::from_raw(2, vec![a, b, c, d]);
        let w = haar_forward(&img, 1).unwrap();
        let expect = [
            (a + b + c + d) / 2.0,
            (a - b + c - d) / 2.0,
            (a + b - c - d) / 2.0,
            (a - b - c + d) / 2.0,
        ];
        for (got, want) in w.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        for (n, levels) in [(8, 3), (16, 2), (12, 1), (32, 4)] {
            let img = random_image(n, 7 + n as u64);
            let w = haar_forward(&img, levels).unwrap();
            let back = haar_inverse(&w, levels).unwrap();
            for (got, want) in back.values().iter().zip(img.values()) {
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transform_preserves_l2_norm() {
        let img = random_image(16, 99);
        let w = haar_forward(&img, 4).unwrap();
        let n_img: f64 = img.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        let n_coef: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n_img - n_coef).abs() < 1e-12 * n_img.max(1.0));
    }

    #[test]
    fn constant_image_concentrates_in_approximation() {
        let c = 0.75;
        let levels = 3;
        let n = 8;
        let img = ImageGrid::from_raw(n, vec![c; n * n]);
        let w = haar_forward(&img, levels).unwrap();
        assert!((w[0] - c * 2f64.powi(levels as i32)).abs() < 1e-12);
        for (i, v) in w.iter().enumerate().skip(1) {
            assert!(v.abs() < 1e-12, "coefficient {i} = {v}");
        }
    }

    #[test]
    fn rejects_indivisible_sizes() {
        let img = random_image(12, 3);
        assert!(haar_forward(&img, 3).is_err());
        assert!(haar_forward(&img, 0).is_err());
        assert!(haar_inverse(&vec![0.0; 10], 1).is_err());
    }

    #[test]
    fn max_levels_divides_and_caps() {
        assert_eq!(max_levels(8), 3);
        assert_eq!(max_levels(12), 2);
        assert_eq!(max_levels(7), 0);
        assert_eq!(max_levels(1024), 4);
    }

    #[test]
    fn rect_round_trip_and_parseval() {
        let (rows, cols) = (8, 16);
        let data: Vec<f64> = (0..rows * cols).map(|i| ((i * 37 + 11) % 23) as f64 - 11.0).collect();
        for levels in 1..=3 {
            let mut w = data.clone();
            haar_forward_rect(&mut w, rows, cols, levels).unwrap();
            let e_img: f64 = data.iter().map(|v| v * v).sum();
            let e_coef: f64 = w.iter().map(|v| v * v).sum();
            assert!((e_img - e_coef).abs() < 1e-12 * e_img);
            haar_inverse_rect(&mut w, rows, cols, levels).unwrap();
            for (a, b) in data.iter().zip(&w) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let mut bad = data.clone();
        assert!(haar_forward_rect(&mut bad, rows, cols, 4).is_err());
        let mut twelve = vec![0.0; 12 * 16];
        assert!(haar_forward_rect(&mut twelve, 12, 16, 2).is_ok());
        assert!(haar_forward_rect(&mut twelve, 12, 16, 3).is_err());
    }
}

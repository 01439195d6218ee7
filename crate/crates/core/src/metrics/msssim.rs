//! Multi-scale structural similarity on the rescaled prediction.

use ndarray::{s, Array2, ArrayView2, ArrayView3};

use crate::{Error, Result};

use super::scale::fit_global_scale;

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
/// Smallest accepted in-plane size.
pub const MIN_SIZE: usize = 32;

fn gaussian_window() -> [f64; WINDOW] {
    let mut w = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-(i as f64 - c).powi(2) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    w
}

/// Separable 'valid' filtering.
fn filter_valid(img: &Array2<f64>, w: &[f64; WINDOW]) -> Array2<f64> {
    let (h, wd) = img.dim();
    let (oh, ow) = (h + 1 - WINDOW, wd + 1 - WINDOW);
    let mut rows = Array2::<f64>::zeros((h, ow));
    for y in 0..h {
        for x in 0..ow {
            rows[[y, x]] = (0..WINDOW).map(|k| w[k] * img[[y, x + k]]).sum();
        }
    }
    let mut out = Array2::<f64>::zeros((oh, ow));
    for y in 0..oh {
        for x in 0..ow {
            out[[y, x]] = (0..WINDOW).map(|k| w[k] * rows[[y + k, x]]).sum();
        }
    }
    out
}

/// Mean SSIM and mean contrast-structure term of one scale.
fn ssim_cs(a: &Array2<f64>, b: &Array2<f64>, c1: f64, c2: f64) -> (f64, f64) {
    let w = gaussian_window();
    let mu_a = filter_valid(a, &w);
    let mu_b = filter_valid(b, &w);
    let aa = filter_valid(&(a * a), &w);
    let bb = filter_valid(&(b * b), &w);
    let ab = filter_valid(&(a * b), &w);
    let n = mu_a.len() as f64;
    let (mut ssim, mut cs) = (0.0, 0.0);
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a.as_slice().unwrap()[i], mu_b.as_slice().unwrap()[i]);
        let va = aa.as_slice().unwrap()[i] - ma * ma;
        let vb = bb.as_slice().unwrap()[i] - mb * mb;
        let cov = ab.as_slice().unwrap()[i] - ma * mb;
        let cs_i = (2.0 * cov + c2) / (va + vb + c2);
        cs += cs_i;
        ssim += (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1) * cs_i;
    }
    (ssim / n, cs / n)
}

/// 2x2 average pooling after cropping to even size.
fn downsample(img: &Array2<f64>) -> Array2<f64> {
    let (h, w) = img.dim();
    Array2::from_shape_fn((h / 2, w / 2), |(y, x)| {
        0.25 * (img[[2 * y, 2 * x]] + img[[2 * y + 1, 2 * x]] + img[[2 * y, 2 * x + 1]] + img[[2 * y + 1, 2 * x + 1]])
    })
}

/// Number of scales for an image whose smaller side is `min_side`.
pub fn scale_count(min_side: usize) -> usize {
    (1..=MS_SSIM_WEIGHTS.len()).take_while(|&n| min_side > (WINDOW - 1) * (1 << (n - 1))).count()
}

/// MS-SSIM of two planes with the given dynamic range.
pub fn ms_ssim_2d(a: ArrayView2<f64>, b: ArrayView2<f64>, data_range: f64) -> Result<f64> {
    let (h, w) = a.dim();
    if h < MIN_SIZE || w < MIN_SIZE {
        return Err(Error::TooSmall(format!("{h}x{w} is below {MIN_SIZE}x{MIN_SIZE}")));
    }
    let levels = scale_count(h.min(w));
    let weights = &MS_SSIM_WEIGHTS[..levels];
    // truncated pyramids keep the total exponent of the full one
    let scale = MS_SSIM_WEIGHTS.iter().sum::<f64>() / weights.iter().sum::<f64>();
    let c1 = (K1 * data_range).powi(2);
    let c2 = (K2 * data_range).powi(2);
    let mut a = a.to_owned();
    let mut b = b.to_owned();
    let mut value = 1.0;
    for (i, &wt) in weights.iter().enumerate() {
        let (ssim, cs) = ssim_cs(&a, &b, c1, c2);
        if i + 1 == levels {
            value *= ssim.max(0.0).powf(wt * scale);
        } else {
            value *= cs.max(0.0).powf(wt * scale);
            a = downsample(&a);
            b = downsample(&b);
        }
    }
    Ok(value)
}

/// MS-SSIM between `gt` and the rescaled prediction, averaged over z slices.
/// The dynamic range is that of `gt`.
pub fn ms_ssim_ri(gt: ArrayView3<f64>, pred: ArrayView3<f64>) -> Result<f64> {
    let g: Vec<f64> = gt.iter().copied().collect();
    let p: Vec<f64> = pred.iter().copied().collect();
    let alpha = fit_global_scale(&g, &p)?;
    let (lo, hi) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return Err(Error::DegenerateGT);
    }
    let scaled = pred.mapv(|v| alpha * v);
    let z = gt.dim().0;
    let mut acc = 0.0;
    for zi in 0..z {
        acc += ms_ssim_2d(gt.slice(s![zi, .., ..]), scaled.slice(s![zi, .., ..]), hi - lo)?;
    }
    Ok(acc / z as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    #[test]
    fn scale_counts() {
        assert_eq!(scale_count(32), 2);
        assert_eq!(scale_count(160), 4);
        assert_eq!(scale_count(161), 5);
        assert_eq!(scale_count(4096), 5);
    }

    #[test]
    fn identical_and_scaled_inputs_score_one() {
        let gt = Array3::from_shape_fn((2, 40, 48), |(z, y, x)| ((x * 7 + y * 3 + z) % 11) as f64);
        assert!((ms_ssim_ri(gt.view(), gt.view()).unwrap() - 1.0).abs() < 1e-12);
        let scaled = gt.mapv(|v| 3.5 * v);
        assert!((ms_ssim_ri(gt.view(), scaled.view()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_images() {
        let gt = Array3::from_shape_fn((1, 31, 64), |(_, y, x)| (x + y) as f64);
        assert!(matches!(ms_ssim_ri(gt.view(), gt.view()), Err(Error::TooSmall(_))));
    }
}

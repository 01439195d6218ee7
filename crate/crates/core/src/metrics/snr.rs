use ndarray::{s, ArrayView3};

use crate::image::SpectralImage;
use crate::{Error, Result};

/// Side of the square background tiles.
pub const PATCH: usize = 16;
/// Fraction of tiles (lowest standard deviation) treated as background.
pub const BACKGROUND_FRACTION: f64 = 0.02;

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `(P99(x) - mu_bg) / sigma_bg`, where the background is pooled from the
/// non-overlapping 16x16 tiles (per z slice) whose standard deviation lies
/// in the lowest 2%. Returns `+inf` when the background is flat.
pub fn snr(x: ArrayView3<f64>) -> Result<f64> {
    let (z, h, w) = x.dim();
    let mut tiles: Vec<(f64, Vec<f64>)> = Vec::new();
    for zi in 0..z {
        for ty in 0..h / PATCH {
            for tx in 0..w / PATCH {
                let tile: Vec<f64> = x
                    .slice(s![zi, ty * PATCH..(ty + 1) * PATCH, tx * PATCH..(tx + 1) * PATCH])
                    .iter()
                    .copied()
                    .collect();
                tiles.push((mean_std(&tile).1, tile));
            }
        }
    }
    let k = (BACKGROUND_FRACTION * tiles.len() as f64).floor() as usize;
    if k == 0 {
        return Err(Error::TooFewPatches { patches: tiles.len(), patch: PATCH });
    }
    // stable: equal deviations keep raster order
    tiles.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pooled: Vec<f64> = tiles[..k].iter().flat_map(|(_, t)| t.iter().copied()).collect();
    let (mu, sigma) = mean_std(&pooled);
    if sigma == 0.0 {
        return Ok(f64::INFINITY);
    }
    let all: Vec<f64> = x.iter().copied().collect();
    Ok((percentile(&all, 99.0) - mu) / sigma)
}

/// Lower median of the per-band SNRs; bands whose SNR fails are skipped.
pub fn spectral_snr(img: &SpectralImage) -> Result<f64> {
    let mut values = Vec::with_capacity(img.bands());
    let mut first_err = None;
    for l in 0..img.bands() {
        match snr(img.band(l)) {
            Ok(v) => values.push(v),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if values.is_empty() {
        return Err(first_err.expect("at least one band"));
    }
    values.sort_by(f64::total_cmp);
    Ok(values[(values.len() - 1) / 2])
}

use crate::{Error, Result};

/// `argmin_a |gt - a pred|^2 = <gt, pred> / <pred, pred>`.
pub fn fit_global_scale(gt: &[f64], pred: &[f64]) -> Result<f64> {
    let pp: f64 = pred.iter().map(|p| p * p).sum();
    if pp == 0.0 {
        return Err(Error::ZeroPrediction);
    }
    let gp: f64 = gt.iter().zip(pred).map(|(g, p)| g * p).sum();
    Ok(gp / pp)
}

/// PSNR between `gt` and the rescaled prediction, with peak `max(gt) - min(gt)`.
pub fn psnr_ri(gt: &[f64], pred: &[f64]) -> Result<f64> {
    let (lo, hi) = gt.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::DegenerateGT);
    }
    let alpha = fit_global_scale(gt, pred)?;
    let mse = gt.iter().zip(pred).map(|(g, p)| (g - alpha * p).powi(2)).sum::<f64>() / gt.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (range * range / mse).log10())
}

/// Centered correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateInput("constant image".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

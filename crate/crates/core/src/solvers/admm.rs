//! ADMM solvers for non-negative (NNLU) and fully constrained (FCLU) linear
//! unmixing.
//!
//! Per voxel the splitting is `min |s - M x|^2 + I_C(z)  s.t.  x = z` with
//! scaled dual `w`:
//!
//! ```text
//! x <- (M^T M + rho I)^{-1} (M^T s + rho (z - w))
//! z <- P_C(x + w)
//! w <- w + x - z
//! ```
//!
//! `C` is the non-negative orthant for NNLU and the probability simplex for
//! FCLU. The matrix `M^T M + rho I` is factored once per image. Iteration
//! stops when `|x - z|` and `rho |z - z_prev|` both fall below the tolerance.
//!
//! With l1-normalised spectra the eigenvalues of `M^T M` are far below the
//! default `rho = 1`, so the iteration reaches the stopping test long before
//! the iterate is accurate. The final ADMM iterate is therefore refined on
//! its support: the equality-constrained least-squares solution on the
//! support is accepted when it satisfies the KKT conditions; otherwise an
//! exact active-set solve (Lawson-Hanson for NNLU, support enumeration for
//! FCLU) is used. The refined point is feasible by construction.

use nalgebra::DMatrix;
use serde_json::json;

use crate::exec;
use crate::image::{from_pixel_major, ConcentrationMap, Meta, SpectralImage};
use crate::linalg::{pseudo_inverse, row_major, solve_dense, CholeskyFactor};
use crate::mixing::MixingMatrix;
use crate::{Error, Result};

use super::{check_bands, SolverConfig};

/// Largest `F` for which FCLU falls back to support enumeration.
const MAX_ENUM_F: usize = 12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Refinement {
    #[default]
    None,
    /// KKT-verified solve on the ADMM support.
    Support,
    /// Exact active-set solve.
    ActiveSet,
}

/// Per-voxel diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct PixelStats {
    pub iterations: usize,
    pub converged: bool,
    /// `|x - z|` at the last ADMM iteration.
    pub primal_residual: f64,
    pub refinement: Refinement,
    pub zero_input: bool,
}

/// Euclidean projection onto `{u >= 0, sum(u) = 1}` (sort-based).
pub fn project_simplex(v: &mut [f64]) {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

fn project_nonneg(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.max(0.0);
    }
}

/// Quantities shared by all voxels of one solve.
struct Problem {
    f: usize,
    l: usize,
    gram: Vec<f64>,
    mt: Vec<f64>,
    pinv: Vec<f64>,
    chol: CholeskyFactor,
    rho: f64,
    tol: f64,
    max_iter: usize,
}

impl Problem {
    fn new(m: &MixingMatrix, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let mm = m.matrix();
        let gram_m = mm.transpose() * mm;
        let shifted = &gram_m + DMatrix::identity(m.fluorophores(), m.fluorophores()) * cfg.admm_rho;
        let chol = CholeskyFactor::new(&shifted)
            .ok_or_else(|| Error::InvalidMixingMatrix("M^T M + rho I is not positive definite".into()))?;
        Ok(Self {
            f: m.fluorophores(),
            l: m.bands(),
            gram: row_major(&gram_m),
            mt: row_major(&mm.transpose()),
            pinv: row_major(&pseudo_inverse(mm)),
            chol,
            rho: cfg.admm_rho,
            tol: cfg.admm_tol,
            max_iter: cfg.admm_max_iter,
        })
    }

    fn mt_times(&self, s: &[f64], out: &mut [f64]) {
        crate::linalg::matvec(&self.mt, self.l, s, out);
    }

    /// Warm start: the unconstrained least-squares solution, projected.
    fn warm_start(&self, s: &[f64], z: &mut [f64], project: fn(&mut [f64])) {
        crate::linalg::matvec(&self.pinv, self.l, s, z);
        project(z);
    }

    /// Runs ADMM from `z`, leaving the last z-iterate in `z`.
    fn admm(&self, b: &[f64], z: &mut [f64], project: fn(&mut [f64]), scratch: &mut Scratch) -> (usize, bool, f64) {
        let f = self.f;
        let Scratch { x, w, z_prev } = scratch;
        w.iter_mut().for_each(|v| *v = 0.0);
        let mut residual = f64::INFINITY;
        for it in 1..=self.max_iter {
            for j in 0..f {
                x[j] = b[j] + self.rho * (z[j] - w[j]);
            }
            self.chol.solve_in_place(x);
            z_prev.copy_from_slice(z);
            for j in 0..f {
                z[j] = x[j] + w[j];
            }
            project(z);
            let mut primal = 0.0;
            let mut dual = 0.0;
            for j in 0..f {
                let r = x[j] - z[j];
                w[j] += r;
                primal += r * r;
                let d = z[j] - z_prev[j];
                dual += d * d;
            }
            residual = primal.sqrt();
            if residual < self.tol && self.rho * dual.sqrt() < self.tol {
                return (it, true, residual);
            }
        }
        (self.max_iter, false, residual)
    }

    fn objective(&self, b: &[f64], u: &[f64]) -> f64 {
        let f = self.f;
        let mut q = 0.0;
        for i in 0..f {
            let gu: f64 = (0..f).map(|k| self.gram[i * f + k] * u[k]).sum();
            q += u[i] * (0.5 * gu - b[i]);
        }
        q
    }

    /// Unconstrained least squares on `support`, zero elsewhere.
    fn solve_support(&self, b: &[f64], support: &[bool], with_sum: bool) -> Option<(Vec<f64>, f64)> {
        let f = self.f;
        let idx: Vec<usize> = (0..f).filter(|&j| support[j]).collect();
        let k = idx.len();
        if k == 0 {
            return None;
        }
        let n = if with_sum { k + 1 } else { k };
        let mut a = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                a[r * n + c] = self.gram[i * f + j];
            }
            rhs[r] = b[i];
            if with_sum {
                a[r * n + k] = 1.0;
                a[k * n + r] = 1.0;
            }
        }
        if with_sum {
            rhs[k] = 1.0;
        }
        solve_dense(&mut a, &mut rhs, n)?;
        let mut u = vec![0.0; f];
        for (r, &i) in idx.iter().enumerate() {
            u[i] = rhs[r];
        }
        Some((u, if with_sum { rhs[k] } else { 0.0 }))
    }

    fn gradient(&self, b: &[f64], u: &[f64]) -> Vec<f64> {
        let f = self.f;
        (0..f).map(|i| (0..f).map(|k| self.gram[i * f + k] * u[k]).sum::<f64>() - b[i]).collect()
    }

    fn kkt_tol(&self, b: &[f64]) -> f64 {
        1e-10 * b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300)
    }

    /// KKT-checked refinement of a non-negative iterate on its support.
    fn refine_nonneg(&self, b: &[f64], z: &[f64]) -> Option<Vec<f64>> {
        let support: Vec<bool> = z.iter().map(|&v| v > 0.0).collect();
        let tol = self.kkt_tol(b);
        let u = if support.iter().any(|&p| p) {
            let (u, _) = self.solve_support(b, &support, false)?;
            if (0..self.f).any(|j| support[j] && u[j] <= 0.0) {
                return None;
            }
            u
        } else {
            vec![0.0; self.f]
        };
        let g = self.gradient(b, &u);
        (0..self.f).all(|j| support[j] || g[j] >= -tol).then_some(u)
    }

    /// Lawson-Hanson NNLS on the normal equations.
    fn lawson_hanson(&self, b: &[f64]) -> Option<Vec<f64>> {
        let f = self.f;
        let tol = self.kkt_tol(b);
        let mut x = vec![0.0; f];
        let mut passive = vec![false; f];
        let cap = 3 * f + 10;
        for _ in 0..cap {
            let g = self.gradient(b, &x);
            let candidate = (0..f)
                .filter(|&j| !passive[j] && -g[j] > tol)
                .max_by(|&i, &j| (-g[i]).total_cmp(&-g[j]));
            let Some(t) = candidate else { return Some(x) };
            passive[t] = true;
            for _ in 0..cap {
                let (y, _) = self.solve_support(b, &passive, false)?;
                if (0..f).all(|j| !passive[j] || y[j] > 0.0) {
                    x = y;
                    break;
                }
                let mut alpha = f64::INFINITY;
                for j in 0..f {
                    if passive[j] && y[j] <= 0.0 {
                        alpha = alpha.min(x[j] / (x[j] - y[j]));
                    }
                }
                for j in 0..f {
                    x[j] += alpha * (y[j] - x[j]);
                    if passive[j] && x[j] <= 0.0 {
                        passive[j] = false;
                        x[j] = 0.0;
                    }
                }
                if !passive.iter().any(|&p| p) {
                    break;
                }
            }
        }
        Some(x)
    }

    /// KKT-checked refinement of a simplex iterate on its support.
    fn refine_simplex(&self, b: &[f64], z: &[f64]) -> Option<Vec<f64>> {
        let support: Vec<bool> = z.iter().map(|&v| v > 0.0).collect();
        let (u, nu) = self.solve_support(b, &support, true)?;
        if (0..self.f).any(|j| support[j] && u[j] <= 0.0) {
            return None;
        }
        let g = self.gradient(b, &u);
        let tol = self.kkt_tol(b).max(1e-12);
        (0..self.f).all(|j| support[j] || g[j] + nu >= -tol).then_some(u)
    }

    /// Exact simplex-constrained least squares by enumerating supports.
    fn enumerate_simplex(&self, b: &[f64]) -> Option<Vec<f64>> {
        let f = self.f;
        if f > MAX_ENUM_F {
            return None;
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 1u32..(1 << f) {
            let support: Vec<bool> = (0..f).map(|j| mask & (1 << j) != 0).collect();
            let Some((u, _)) = self.solve_support(b, &support, true) else { continue };
            if (0..f).any(|j| support[j] && u[j] < 0.0) {
                continue;
            }
            let obj = self.objective(b, &u);
            if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                best = Some((obj, u));
            }
        }
        best.map(|(_, u)| u)
    }
}

struct Scratch {
    x: Vec<f64>,
    w: Vec<f64>,
    z_prev: Vec<f64>,
}

impl Scratch {
    fn new(f: usize) -> Self {
        Self { x: vec![0.0; f], w: vec![0.0; f], z_prev: vec![0.0; f] }
    }
}

fn summarize(stats: &[PixelStats]) -> Meta {
    let n = stats.len().max(1) as f64;
    let converged = stats.iter().filter(|s| s.converged).count();
    let support = stats.iter().filter(|s| s.refinement == Refinement::Support).count();
    let active = stats.iter().filter(|s| s.refinement == Refinement::ActiveSet).count();
    let zero = stats.iter().filter(|s| s.zero_input).count();
    if converged < stats.len() {
        log::debug!("ADMM stopped at the iteration cap in {} of {} voxels", stats.len() - converged, stats.len());
    }
    let mut meta = Meta::new();
    meta.insert("admm_converged_fraction".into(), json!(converged as f64 / n));
    meta.insert("admm_max_iterations".into(), json!(stats.iter().map(|s| s.iterations).max().unwrap_or(0)));
    meta.insert(
        "admm_mean_iterations".into(),
        json!(stats.iter().map(|s| s.iterations as f64).sum::<f64>() / n),
    );
    meta.insert("refined_support_voxels".into(), json!(support));
    meta.insert("refined_active_set_voxels".into(), json!(active));
    meta.insert("zero_input_voxels".into(), json!(zero));
    meta
}

/// Non-negative least squares per voxel, `min |s - M u|^2 s.t. u >= 0`.
pub fn unmix_nnlu(s: &SpectralImage, m: &MixingMatrix, cfg: &SolverConfig) -> Result<ConcentrationMap> {
    check_bands(s, m)?;
    let (out, stats) = nnlu_pixels(&s.to_pixel_major(), m, cfg)?;
    let f = m.fluorophores();
    Ok(ConcentrationMap::new(from_pixel_major(&out, f, s.dims()), m.labels().to_vec())?.with_meta(summarize(&stats)))
}

/// NNLU on a pixel-major buffer (`pixels x L`).
pub fn nnlu_pixels(pixels: &[f64], m: &MixingMatrix, cfg: &SolverConfig) -> Result<(Vec<f64>, Vec<PixelStats>)> {
    let p = Problem::new(m, cfg)?;
    let (l, f) = (p.l, p.f);
    Ok(exec::map_rows(pixels, l, f, || (Scratch::new(f), vec![0.0; f]), |(scratch, b), _, s, z| {
        p.mt_times(s, b);
        p.warm_start(s, z, project_nonneg);
        let (iterations, converged, primal_residual) = p.admm(b, z, project_nonneg, scratch);
        let mut stats = PixelStats { iterations, converged, primal_residual, ..Default::default() };
        if let Some(u) = p.refine_nonneg(b, z) {
            z.copy_from_slice(&u);
            stats.refinement = Refinement::Support;
        } else if let Some(u) = p.lawson_hanson(b) {
            z.copy_from_slice(&u);
            stats.refinement = Refinement::ActiveSet;
        }
        project_nonneg(z);
        stats
    }))
}

/// Fully constrained least squares per voxel on l1-normalised spectra:
/// `min |s/|s|_1 - M u|^2 s.t. u >= 0, sum(u) = 1`. Zero voxels map to 0.
pub fn unmix_fclu(s: &SpectralImage, m: &MixingMatrix, cfg: &SolverConfig) -> Result<ConcentrationMap> {
    check_bands(s, m)?;
    let (out, stats) = fclu_pixels(&s.to_pixel_major(), m, cfg)?;
    let f = m.fluorophores();
    Ok(ConcentrationMap::new(from_pixel_major(&out, f, s.dims()), m.labels().to_vec())?.with_meta(summarize(&stats)))
}

pub fn fclu_pixels(pixels: &[f64], m: &MixingMatrix, cfg: &SolverConfig) -> Result<(Vec<f64>, Vec<PixelStats>)> {
    let p = Problem::new(m, cfg)?;
    let (l, f) = (p.l, p.f);
    let init = || (Scratch::new(f), vec![0.0; f], vec![0.0; l]);
    Ok(exec::map_rows(pixels, l, f, init, |(scratch, b, sn), _, s, z| {
        let norm: f64 = s.iter().map(|v| v.abs()).sum();
        if norm == 0.0 {
            z.iter_mut().for_each(|v| *v = 0.0);
            return PixelStats { zero_input: true, ..Default::default() };
        }
        for (d, &v) in sn.iter_mut().zip(s) {
            *d = v / norm;
        }
        p.mt_times(sn, b);
        p.warm_start(sn, z, project_simplex);
        let (iterations, converged, primal_residual) = p.admm(b, z, project_simplex, scratch);
        let mut stats = PixelStats { iterations, converged, primal_residual, ..Default::default() };
        if let Some(u) = p.refine_simplex(b, z) {
            z.copy_from_slice(&u);
            stats.refinement = Refinement::Support;
        } else if let Some(u) = p.enumerate_simplex(b) {
            z.copy_from_slice(&u);
            stats.refinement = Refinement::ActiveSet;
        }
        project_nonneg(z);
        let total: f64 = z.iter().sum();
        z.iter_mut().for_each(|v| *v /= total);
        stats
    }))
}

//! Richardson-Lucy unmixing.

use crate::exec;
use crate::image::{from_pixel_major, ConcentrationMap, SpectralImage};
use crate::linalg::row_major;
use crate::mixing::MixingMatrix;
use crate::Result;

use super::{check_bands, SolverConfig};

/// Floor on the predicted band value in the ratio term.
pub const RLU_FLOOR: f64 = 1e-12;

/// `KL(s || q) = sum s log(s/q) - s + q`, with `0 log 0 = 0` and `q` floored
/// where `s > 0`.
pub fn kl_divergence(s: &[f64], q: &[f64]) -> f64 {
    s.iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a > 0.0 {
                let b = b.max(RLU_FLOOR);
                a * (a / b).ln() - a + b
            } else {
                b
            }
        })
        .sum()
}

struct Rl<'a> {
    m: &'a [f64],
    l: usize,
    f: usize,
}

impl Rl<'_> {
    fn predict(&self, u: &[f64], q: &mut [f64]) {
        crate::linalg::matvec(self.m, self.f, u, q);
    }

    fn step(&self, s: &[f64], u: &mut [f64], q: &mut [f64]) {
        self.predict(u, q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi = si / qi.max(RLU_FLOOR);
        }
        for (j, uj) in u.iter_mut().enumerate() {
            let mut acc = 0.0;
            for l in 0..self.l {
                acc += self.m[l * self.f + j] * q[l];
            }
            *uj *= acc;
        }
    }

    fn init(&self, s: &[f64], sc: &mut [f64], u: &mut [f64]) {
        for (d, &v) in sc.iter_mut().zip(s) {
            *d = v.max(0.0);
        }
        let start = sc.iter().sum::<f64>() / self.f as f64;
        u.iter_mut().for_each(|v| *v = start);
    }
}

/// Multiplicative Richardson-Lucy updates per voxel for `cfg.rlu_iters`
/// iterations from the uniform start `sum(s)/F`. Negative input is clamped.
pub fn unmix_rlu(s: &SpectralImage, m: &MixingMatrix, cfg: &SolverConfig) -> Result<ConcentrationMap> {
    check_bands(s, m)?;
    cfg.validate()?;
    let (l, f) = (m.bands(), m.fluorophores());
    let mm = row_major(m.matrix());
    let rl = Rl { m: &mm, l, f };
    let (out, _) = exec::map_rows(&s.to_pixel_major(), l, f, || (vec![0.0; l], vec![0.0; l]), |(sc, q), _, x, u| {
        rl.init(x, sc, u);
        for _ in 0..cfg.rlu_iters {
            rl.step(sc, u, q);
        }
    });
    ConcentrationMap::new(from_pixel_major(&out, f, s.dims()), m.labels().to_vec())
}

/// Runs RLU on one spectrum, returning the estimate and `KL(s || M u^t)` for
/// `t = 0..=iters`.
pub fn rlu_trace(s: &[f64], m: &MixingMatrix, iters: usize) -> (Vec<f64>, Vec<f64>) {
    let (l, f) = (m.bands(), m.fluorophores());
    let mm = row_major(m.matrix());
    let rl = Rl { m: &mm, l, f };
    let mut sc = vec![0.0; l];
    let mut q = vec![0.0; l];
    let mut u = vec![0.0; f];
    rl.init(s, &mut sc, &mut u);
    let mut trace = Vec::with_capacity(iters + 1);
    let kl = |u: &[f64], q: &mut [f64]| {
        rl.predict(u, q);
        kl_divergence(&sc, q)
    };
    trace.push(kl(&u, &mut q));
    for _ in 0..iters {
        rl.step(&sc, &mut u, &mut q);
        trace.push(kl(&u, &mut q));
    }
    (u, trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_exact_after_one_step() {
        let m = MixingMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let (u, _) = rlu_trace(&[4.0, 6.0], &m, 1);
        assert_eq!(u, vec![4.0, 6.0]);
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let m = MixingMatrix::from_rows(&[&[0.7, 0.2], &[0.3, 0.8]]).unwrap();
        let (u, trace) = rlu_trace(&[0.0, 0.0], &m, 10);
        assert_eq!(u, vec![0.0, 0.0]);
        assert!(trace.iter().all(|&k| k == 0.0));
    }

    #[test]
    fn kl_is_zero_on_match() {
        assert_eq!(kl_divergence(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert!(kl_divergence(&[1.0, 2.0], &[2.0, 1.0]) > 0.0);
    }
}

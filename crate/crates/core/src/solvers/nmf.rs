//! NMF with reference initialisation (NMF-RI): joint multiplicative updates
//! of spectra and abundances starting from a known mixing matrix.

use nalgebra::DMatrix;
use rand::Rng;
use serde_json::json;

use crate::exec;
use crate::image::{from_pixel_major, ConcentrationMap, SpectralImage};
use crate::mixing::MixingMatrix;
use crate::rng::substream;
use crate::Result;

use super::{check_bands, SolverConfig};

/// Denominator floor of the multiplicative updates.
pub const NMF_EPS: f64 = 1e-12;

/// Objective history of a traced run: `|S - M U|_F^2` after the M-update of
/// each iteration, before column renormalisation.
#[derive(Debug, Clone)]
pub struct NmfTrace {
    pub initial: f64,
    pub objective: Vec<f64>,
}

struct State {
    l: usize,
    f: usize,
    /// `P x L`, clamped at zero.
    s: Vec<f64>,
    /// `P x F`.
    u: Vec<f64>,
    /// `L x F`, row-major.
    m: Vec<f64>,
}

impl State {
    fn new(s: &[f64], m: &MixingMatrix, seed: u64) -> Self {
        let (l, f) = (m.bands(), m.fluorophores());
        let s: Vec<f64> = s.iter().map(|v| v.max(0.0)).collect();
        let pixels = s.len() / l;
        let mut u = vec![0.0; pixels * f];
        exec::for_each_row_mut(&mut u, f, |p, row| {
            let total: f64 = s[p * l..(p + 1) * l].iter().sum();
            let mut rng = substream(seed, p as u64);
            for v in row.iter_mut() {
                // uniform on (0, 1]
                let r = 1.0 - rng.random::<f64>();
                *v = r * 2.0 * total / f as f64;
            }
        });
        Self { l, f, s, u, m: crate::linalg::row_major(m.matrix()) }
    }

    fn pixels(&self) -> usize {
        self.s.len() / self.l
    }

    fn gram_m(&self) -> Vec<f64> {
        let (l, f) = (self.l, self.f);
        let mut g = vec![0.0; f * f];
        for i in 0..f {
            for j in 0..f {
                g[i * f + j] = (0..l).map(|b| self.m[b * f + i] * self.m[b * f + j]).sum();
            }
        }
        g
    }

    fn update_u(&mut self) {
        let (l, f) = (self.l, self.f);
        let g = self.gram_m();
        let (m, s) = (&self.m, &self.s);
        exec::for_each_row_mut(&mut self.u, f, |p, u| {
            let sp = &s[p * l..(p + 1) * l];
            let mut next = [0.0; 64];
            let next = if f <= 64 { &mut next[..f] } else { &mut vec![0.0; f][..] };
            for j in 0..f {
                let num: f64 = (0..l).map(|b| m[b * f + j] * sp[b]).sum();
                let den: f64 = (0..f).map(|k| g[j * f + k] * u[k]).sum();
                next[j] = u[j] * num / den.max(NMF_EPS);
            }
            u.copy_from_slice(next);
        });
    }

    /// Returns `(S U^T, U U^T)` by ordered chunked reduction over pixels.
    fn cross_products(&self) -> (Vec<f64>, Vec<f64>) {
        let (l, f) = (self.l, self.f);
        let add = |(mut a, mut b): (Vec<f64>, Vec<f64>), (c, d): (Vec<f64>, Vec<f64>)| {
            a.iter_mut().zip(&c).for_each(|(x, y)| *x += y);
            b.iter_mut().zip(&d).for_each(|(x, y)| *x += y);
            (a, b)
        };
        exec::reduce_chunks(
            self.pixels(),
            (vec![0.0; l * f], vec![0.0; f * f]),
            |start, end| {
                let mut su = vec![0.0; l * f];
                let mut uu = vec![0.0; f * f];
                for p in start..end {
                    let sp = &self.s[p * l..(p + 1) * l];
                    let up = &self.u[p * f..(p + 1) * f];
                    for b in 0..l {
                        for j in 0..f {
                            su[b * f + j] += sp[b] * up[j];
                        }
                    }
                    for i in 0..f {
                        for j in 0..f {
                            uu[i * f + j] += up[i] * up[j];
                        }
                    }
                }
                (su, uu)
            },
            add,
        )
    }

    fn update_m(&mut self) {
        let (l, f) = (self.l, self.f);
        let (su, uu) = self.cross_products();
        let old = self.m.clone();
        for b in 0..l {
            for j in 0..f {
                let den: f64 = (0..f).map(|k| old[b * f + k] * uu[k * f + j]).sum();
                self.m[b * f + j] = old[b * f + j] * su[b * f + j] / den.max(NMF_EPS);
            }
        }
    }

    fn renormalize(&mut self) {
        let (l, f) = (self.l, self.f);
        let sums: Vec<f64> = (0..f).map(|j| (0..l).map(|b| self.m[b * f + j]).sum()).collect();
        for b in 0..l {
            for j in 0..f {
                if sums[j] > 0.0 {
                    self.m[b * f + j] /= sums[j];
                }
            }
        }
        exec::for_each_row_mut(&mut self.u, f, |_, u| {
            for (v, &c) in u.iter_mut().zip(&sums) {
                if c > 0.0 {
                    *v *= c;
                }
            }
        });
    }

    fn objective(&self) -> f64 {
        let (l, f) = (self.l, self.f);
        exec::reduce_chunks(
            self.pixels(),
            0.0,
            |start, end| {
                let mut acc = 0.0;
                for p in start..end {
                    for b in 0..l {
                        let pred: f64 = (0..f).map(|j| self.m[b * f + j] * self.u[p * f + j]).sum();
                        acc += (self.s[p * l + b] - pred).powi(2);
                    }
                }
                acc
            },
            |a, b| a + b,
        )
    }

    fn run(&mut self, iters: usize, mut trace: Option<&mut NmfTrace>) {
        if let Some(t) = trace.as_deref_mut() {
            t.initial = self.objective();
        }
        for _ in 0..iters {
            self.update_u();
            self.update_m();
            if let Some(t) = trace.as_deref_mut() {
                t.objective.push(self.objective());
            }
            self.renormalize();
        }
    }
}

fn finish(state: State, s: &SpectralImage, m: &MixingMatrix, iters: usize) -> Result<(ConcentrationMap, MixingMatrix)> {
    let (l, f) = (state.l, state.f);
    let mut mm = DMatrix::from_row_slice(l, f, &state.m);
    // columns that collapsed to zero keep their reference spectrum
    for j in 0..f {
        if mm.column(j).sum() <= 0.0 {
            mm.set_column(j, &m.matrix().column(j));
        }
    }
    let refined = MixingMatrix::normalized(mm, m.labels().to_vec(), m.layout().cloned())?;
    let mut meta = crate::image::Meta::new();
    meta.insert("nmf_iterations".into(), json!(iters));
    let u = ConcentrationMap::new(from_pixel_major(&state.u, f, s.dims()), m.labels().to_vec())?.with_meta(meta);
    Ok((u, refined))
}

/// NMF-RI: Lee-Seung updates of `|S - M U|_F^2` from `M = m_init` and random
/// non-negative `U`, with columns of `M` renormalised to unit l1 norm after
/// every iteration. Returns the abundances and the refined mixing matrix.
pub fn unmix_nmf_ri(
    s: &SpectralImage,
    m_init: &MixingMatrix,
    cfg: &SolverConfig,
) -> Result<(ConcentrationMap, MixingMatrix)> {
    check_bands(s, m_init)?;
    cfg.validate()?;
    let mut state = State::new(&s.to_pixel_major(), m_init, cfg.rng_seed);
    state.run(cfg.nmf_iters, None);
    finish(state, s, m_init, cfg.nmf_iters)
}

/// As [`unmix_nmf_ri`], also recording the objective at every iteration.
pub fn unmix_nmf_ri_traced(
    s: &SpectralImage,
    m_init: &MixingMatrix,
    cfg: &SolverConfig,
) -> Result<(ConcentrationMap, MixingMatrix, NmfTrace)> {
    check_bands(s, m_init)?;
    cfg.validate()?;
    let mut state = State::new(&s.to_pixel_major(), m_init, cfg.rng_seed);
    let mut trace = NmfTrace { initial: 0.0, objective: Vec::with_capacity(cfg.nmf_iters) };
    state.run(cfg.nmf_iters, Some(&mut trace));
    let (u, m) = finish(state, s, m_init, cfg.nmf_iters)?;
    Ok((u, m, trace))
}

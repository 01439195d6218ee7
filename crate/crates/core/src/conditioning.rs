//! Conditioning of the mixing matrix and the least-squares noise bound.
//!
//! For the pixel-wise least-squares estimate `u_hat = M^+ s` with
//! `s = M u + eps`, the error satisfies `|u_hat - u|_2 <= |eps|_2 / sigma_F`,
//! where `sigma_F` is the smallest of the `F` singular values of `M`.

use serde::{Deserialize, Serialize};

use crate::io::float_repr;
use crate::linalg::{singular_values, RANK_TOL};
use crate::mixing::MixingMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningReport {
    /// `sigma_1 >= ... >= sigma_F`, padded with zeros when `L < F`.
    pub singular_values: Vec<f64>,
    /// `sigma_max / sigma_min`, infinite when rank deficient.
    #[serde(with = "float_repr")]
    pub kappa: f64,
    pub rank_deficient: bool,
    /// `1 / sigma_F`, infinite when rank deficient.
    #[serde(with = "float_repr")]
    pub amplification_bound: f64,
}

/// Singular value spectrum, condition number and noise amplification bound.
/// Singular values below `1e-12 * sigma_max` count as zero.
pub fn analyze_conditioning(m: &MixingMatrix) -> ConditioningReport {
    let f = m.fluorophores();
    let mut sv = singular_values(m.matrix());
    sv.resize(f, 0.0);
    let smax = sv[0];
    let smin = sv[f - 1];
    let rank_deficient = smax == 0.0 || smin < RANK_TOL * smax;
    let (kappa, amplification_bound) = if rank_deficient {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (smax / smin, 1.0 / smin)
    };
    ConditioningReport { singular_values: sv, kappa, rank_deficient, amplification_bound }
}

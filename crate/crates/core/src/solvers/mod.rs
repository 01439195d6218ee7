//! The unmixing solvers.

pub mod admm;
pub mod config;
pub mod hyu;
pub mod lu;
pub mod lumos;
pub mod nmf;
pub mod phasor;
pub mod rlu;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::image::{ConcentrationMap, SpectralImage};
use crate::mixing::MixingMatrix;
use crate::{Error, Result};

pub use admm::{project_simplex, unmix_fclu, unmix_nnlu};
pub use config::SolverConfig;
pub use hyu::unmix_hyu;
pub use lu::unmix_lu;
pub use lumos::unmix_lumos;
pub use nmf::{unmix_nmf_ri, unmix_nmf_ri_traced, NmfTrace};
pub use phasor::{phasor_transform, Phasor, PhasorHistogram};
pub use rlu::{kl_divergence, rlu_trace, unmix_rlu};

/// Largest band count for which LUMoS is considered meaningful.
pub const LUMOS_MAX_BANDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "lu")]
    Lu,
    #[serde(rename = "nnlu")]
    Nnlu,
    #[serde(rename = "fclu")]
    Fclu,
    #[serde(rename = "rlu")]
    Rlu,
    #[serde(rename = "nmf-ri")]
    NmfRi,
    #[serde(rename = "hyu")]
    Hyu,
    #[serde(rename = "lumos")]
    Lumos,
}

impl Method {
    pub const ALL: [Method; 7] =
        [Method::Lu, Method::Nnlu, Method::Fclu, Method::Rlu, Method::NmfRi, Method::Hyu, Method::Lumos];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lu => "lu",
            Method::Nnlu => "nnlu",
            Method::Fclu => "fclu",
            Method::Rlu => "rlu",
            Method::NmfRi => "nmf-ri",
            Method::Hyu => "hyu",
            Method::Lumos => "lumos",
        }
    }

    /// Whether outputs are guaranteed non-negative.
    pub fn nonneg(self) -> bool {
        !matches!(self, Method::Lu | Method::Hyu)
    }

    /// Whether the output on a crop equals the crop of the output.
    pub fn pixel_decomposable(self) -> bool {
        matches!(self, Method::Lu | Method::Nnlu | Method::Fclu | Method::Rlu)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

/// A solver result; NMF-RI also returns its refined mixing matrix.
#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub estimate: ConcentrationMap,
    pub refined_mixing: Option<MixingMatrix>,
}

pub(crate) fn check_bands(s: &SpectralImage, m: &MixingMatrix) -> Result<()> {
    if s.bands() != m.bands() {
        return Err(Error::ShapeMismatch(format!(
            "image has {} bands, mixing matrix has {}",
            s.bands(),
            m.bands()
        )));
    }
    Ok(())
}

/// Runs `method`. LUMoS uses one cluster per fluorophore.
pub fn run(method: Method, s: &SpectralImage, m: &MixingMatrix, cfg: &SolverConfig) -> Result<SolverOutput> {
    let estimate = match method {
        Method::Lu => unmix_lu(s, m)?,
        Method::Nnlu => unmix_nnlu(s, m, cfg)?,
        Method::Fclu => unmix_fclu(s, m, cfg)?,
        Method::Rlu => unmix_rlu(s, m, cfg)?,
        Method::Hyu => unmix_hyu(s, m, cfg)?,
        Method::Lumos => unmix_lumos(s, m, m.fluorophores(), cfg)?,
        Method::NmfRi => {
            let (u, refined) = unmix_nmf_ri(s, m, cfg)?;
            return Ok(SolverOutput { estimate: u, refined_mixing: Some(refined) });
        }
    };
    Ok(SolverOutput { estimate, refined_mixing: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("pca".parse::<Method>().is_err());
    }
}

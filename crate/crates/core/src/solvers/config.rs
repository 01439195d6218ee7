use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hyperparameters shared by the unmixing solvers. The JSON form uses exactly
/// these field names; unknown keys are rejected and missing ones default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub admm_rho: f64,
    pub admm_tol: f64,
    pub admm_max_iter: usize,
    pub rlu_iters: usize,
    pub nmf_iters: usize,
    pub hyu_harmonic: usize,
    pub hyu_bins: usize,
    pub lumos_restarts: usize,
    pub lumos_max_iter: usize,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            admm_rho: 1.0,
            admm_tol: 1e-6,
            admm_max_iter: 200,
            rlu_iters: 100,
            nmf_iters: 500,
            hyu_harmonic: 1,
            hyu_bins: 128,
            lumos_restarts: 10,
            lumos_max_iter: 200,
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("admm_max_iter", self.admm_max_iter),
            ("rlu_iters", self.rlu_iters),
            ("nmf_iters", self.nmf_iters),
            ("hyu_harmonic", self.hyu_harmonic),
            ("hyu_bins", self.hyu_bins),
            ("lumos_restarts", self.lumos_restarts),
            ("lumos_max_iter", self.lumos_max_iter),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
        }
        for (name, v) in [("admm_rho", self.admm_rho), ("admm_tol", self.admm_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_json() {
        let cfg = SolverConfig::from_json_str(r#"{"admm_rho": 2.0, "rng_seed": 9}"#).unwrap();
        assert_eq!(cfg.admm_rho, 2.0);
        assert_eq!(cfg.rng_seed, 9);
        assert_eq!(cfg.admm_max_iter, 200);
        assert_eq!(cfg.hyu_bins, 128);
        assert_eq!(cfg.lumos_restarts, 10);
        assert!(SolverConfig::from_json_str(r#"{"admm_rh": 2.0}"#).is_err());
        assert!(SolverConfig::from_json_str(r#"{"rlu_iters": 0}"#).is_err());
        assert!(SolverConfig::from_json_str(r#"{"admm_tol": -1}"#).is_err());
    }
}

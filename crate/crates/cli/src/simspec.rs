//! Simulation spec. The manifest written by `simulate` is a spec of the same
//! shape with every field filled in and spectrum paths made absolute.

use std::path::Path;

use serde::{Deserialize, Serialize};
use specmix_core::bench::DEFAULT_FLUOROPHORES;
use specmix_core::simulator::{AcquisitionConfig, PhantomSpec};
use specmix_core::{BandLayout, Error, Result, SpectrumSource};

fn default_layout() -> BandLayout {
    BandLayout::uniform(440.0, 700.0, 32).expect("valid default layout")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub phantom: PhantomSpec,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default = "default_layout")]
    pub layout: BandLayout,
    /// One per fluorophore; defaults to the built-in presets.
    #[serde(default)]
    pub spectra: Vec<SpectrumSource>,
}

impl SimSpec {
    /// Reads a spec; relative spectrum paths resolve against its directory.
    pub fn from_json_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut spec: Self = serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        let base = crate::commands::absolute_base(path)?;
        if spec.spectra.is_empty() {
            let f = spec.phantom.fluorophores;
            if f > DEFAULT_FLUOROPHORES.len() {
                return Err(Error::InvalidConfig(format!("no default spectra for {f} fluorophores; list them under `spectra`")));
            }
            spec.spectra = DEFAULT_FLUOROPHORES[..f].iter().map(|n| SpectrumSource::preset(n)).collect();
        }
        spec.spectra = spec.spectra.iter().map(|s| s.absolutized(&base)).collect();
        spec.phantom.validate()?;
        spec.acquisition.validate()?;
        if spec.spectra.len() != spec.phantom.fluorophores {
            return Err(Error::InvalidConfig(format!(
                "{} spectra for {} fluorophores",
                spec.spectra.len(),
                spec.phantom.fluorophores
            )));
        }
        Ok(spec)
    }
}

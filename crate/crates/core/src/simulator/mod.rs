//! Synthetic ground truth and the acquisition model.

mod acquisition;
mod phantom;
pub mod poisson;
mod rebin;

pub use acquisition::{simulate_acquisition, AcquisitionConfig, DEFAULT_GAIN};
pub use phantom::{generate_phantom, PhantomKind, PhantomSpec};
pub use rebin::rebin_bands;

use crate::spectrum::EmissionSpectrum;

/// Rigid wavelength shift of a spectrum.
pub fn shift_spectrum(spec: &EmissionSpectrum, delta_nm: f64) -> EmissionSpectrum {
    spec.shifted(delta_nm)
}

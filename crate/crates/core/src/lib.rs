//! Spectral unmixing toolkit for fluorescence microscopy.
//!
//! The crate is organised around the linear image-formation model
//! `S = M U + noise`, where `S` is an `L`-band spectral image, `U` holds the
//! `F` fluorophore concentration maps and `M` is the `L x F` mixing matrix of
//! l1-normalised emission spectra.
//!
//! * [`spectrum`], [`bands`], [`mixing`], [`image`], [`conditioning`]: data
//!   model, forward mixing and conditioning analysis.
//! * [`solvers`]: the classical unmixing procedures (LU, NNLU, FCLU, RLU,
//!   NMF-RI, HyU, LUMoS).
//! * [`simulator`]: phantoms and the photon/detector acquisition model.
//! * [`metrics`]: range-invariant PSNR and MS-SSIM, Pearson, SNR.
//! * [`io`]: the `SPMX1` array container and CSV/JSON helpers.
//! * [`bench`]: noise, overlap and band-count sweeps.
//!
//! Pixel-parallel kernels run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise. Results are
//! bitwise identical either way.

pub mod bands;
pub mod bench;
pub mod conditioning;
mod error;
pub mod exec;
pub mod image;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod mixing;
pub mod rng;
pub mod simulator;
pub mod solvers;
pub mod spectrum;

pub use bands::BandLayout;
pub use conditioning::{analyze_conditioning, ConditioningReport};
pub use error::{Error, Result};
pub use image::{ConcentrationMap, Meta, SpectralImage};
pub use mixing::{build_mixing_matrix, discretize_spectrum, mix_forward, MixingMatrix};
pub use spectrum::{EmissionSpectrum, ParametricSpectrum, SpectrumSource};

//! Sweep harness: exposure, spectral-overlap and band-count experiments over
//! synthetic phantoms, with per-condition metric tables.

mod report;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bands::{contiguous_groups, BandLayout};
use crate::conditioning::analyze_conditioning;
use crate::exec;
use crate::image::{ConcentrationMap, SpectralImage};
use crate::metrics::{evaluate, spectral_snr, MetricReport};
use crate::mixing::{build_mixing_matrix, MixingMatrix};
use crate::simulator::{generate_phantom, shift_spectrum, simulate_acquisition, AcquisitionConfig, PhantomSpec};
use crate::solvers::{self, Method, SolverConfig, LUMOS_MAX_BANDS};
use crate::spectrum::{EmissionSpectrum, SpectrumSource};
use crate::{Error, Result};

pub use report::{
    compare_methods, write_outputs, BenchReport, CellStats, ConditionResult, MetricRanking, RankEntry, Ranking,
    Summary,
};

/// Default fluorophores, in the order they are assigned to channels.
pub const DEFAULT_FLUOROPHORES: [&str; 5] = ["mturquoise", "egfp", "mvenus", "tdtomato", "mcherry"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Exposure time in ms.
    Exposure,
    /// Fluorophore `j` is the first spectrum shifted by `j * value` nm.
    OverlapDelta,
    /// Band count, expected photons per band held constant.
    BandCountSameSnr,
    /// Band count, total expected photons held constant.
    BandCountSameBudget,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Exposure => "exposure",
            SweepAxis::OverlapDelta => "overlap_delta",
            SweepAxis::BandCountSameSnr => "band_count_same_snr",
            SweepAxis::BandCountSameBudget => "band_count_same_budget",
        }
    }
}

fn default_layout() -> BandLayout {
    BandLayout::uniform(440.0, 700.0, 32).expect("valid default layout")
}

fn default_dataset() -> String {
    "phantom".into()
}

fn default_replicates() -> usize {
    1
}

/// One experiment axis. Missing optional fields take desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub phantom: PhantomSpec,
    pub solvers: Vec<Method>,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_dataset")]
    pub dataset: String,
    /// Detection bands (the full-resolution layout for band-count axes).
    #[serde(default = "default_layout")]
    pub layout: BandLayout,
    /// One source per fluorophore; only the first is used on the overlap axis.
    #[serde(default)]
    pub spectra: Vec<SpectrumSource>,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        self.phantom.validate()?;
        self.acquisition.validate()?;
        self.solver.validate()?;
        if self.values.is_empty() {
            return bad("sweep values must not be empty".into());
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        let increasing = self.values.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.values.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return bad("sweep values must be strictly monotone".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.solvers.is_empty() {
            return bad("at least one solver is required".into());
        }
        match self.axis {
            SweepAxis::Exposure => {
                if self.values.iter().any(|&v| v <= 0.0) {
                    return bad("exposures must be positive".into());
                }
            }
            SweepAxis::OverlapDelta => {}
            _ => {
                let max = self.layout.len();
                if self.values.iter().any(|&v| v.fract() != 0.0 || v < 1.0 || v > max as f64) {
                    return bad(format!("band counts must be integers in 1..={max}"));
                }
            }
        }
        let needed = if self.axis == SweepAxis::OverlapDelta { 1 } else { self.phantom.fluorophores };
        if !self.spectra.is_empty() && self.spectra.len() < needed {
            return bad(format!("{} spectra given, {needed} needed", self.spectra.len()));
        }
        if self.spectra.is_empty() && needed > DEFAULT_FLUOROPHORES.len() {
            return bad(format!("no default spectra for {needed} fluorophores; list them under `spectra`"));
        }
        Ok(())
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: Self = serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    fn sources(&self) -> Vec<SpectrumSource> {
        if self.spectra.is_empty() {
            DEFAULT_FLUOROPHORES.iter().map(|n| SpectrumSource::preset(n)).collect()
        } else {
            self.spectra.clone()
        }
    }
}

/// The mixing matrix and expected-photon scale of one sweep value.
struct Condition {
    mixing: MixingMatrix,
    acquisition: AcquisitionConfig,
}

fn condition(spec: &SweepSpec, spectra: &[EmissionSpectrum], value: f64) -> Result<Condition> {
    let f = spec.phantom.fluorophores;
    let mut acquisition = spec.acquisition.clone();
    let mixing = match spec.axis {
        SweepAxis::Exposure => {
            acquisition.exposure_ms = value;
            build_mixing_matrix(&spectra[..f], &spec.layout)?
        }
        SweepAxis::OverlapDelta => {
            let base = &spectra[0];
            let shifted: Vec<EmissionSpectrum> = (0..f)
                .map(|j| {
                    let s = shift_spectrum(base, j as f64 * value);
                    if j == 0 { s } else { s.with_name(format!("{}_shift{j}", base.name())) }
                })
                .collect();
            build_mixing_matrix(&shifted, &spec.layout)?
        }
        SweepAxis::BandCountSameSnr | SweepAxis::BandCountSameBudget => {
            let full = build_mixing_matrix(&spectra[..f], &spec.layout)?;
            let bands = value as usize;
            if spec.axis == SweepAxis::BandCountSameSnr {
                acquisition.photons_per_unit_per_ms *= bands as f64 / spec.layout.len() as f64;
            }
            full.rebinned(&contiguous_groups(spec.layout.len(), bands)?)?
        }
    };
    Ok(Condition { mixing, acquisition })
}

/// Subtracts the detector offset recorded by the simulator.
pub fn subtract_offset(img: &SpectralImage, offset: f64) -> SpectralImage {
    let data = img.data().mapv(|v| v - offset);
    SpectralImage::new(data, img.layout().cloned()).expect("same shape").with_meta(img.meta.clone())
}

/// Outcome of one (value, replicate) job.
struct Trial {
    spectral_snr: Result<f64>,
    cells: Vec<Result<MetricReport>>,
}

fn run_trial(
    spec: &SweepSpec,
    gt: &ConcentrationMap,
    cond: &Condition,
    replicate: usize,
) -> Result<Trial> {
    let mut acq = cond.acquisition.clone();
    acq.rng_seed = acq.rng_seed.wrapping_add(replicate as u64);
    let raw = simulate_acquisition(gt, &cond.mixing, &acq)?;
    let s = subtract_offset(&raw, acq.offset);
    let mut solver = spec.solver.clone();
    solver.rng_seed = solver.rng_seed.wrapping_add(replicate as u64);
    let cells = exec::map_indices(spec.solvers.len(), |i| {
        let method = spec.solvers[i];
        if method == Method::Lumos && s.bands() > LUMOS_MAX_BANDS {
            return Err(Error::InvalidConfig(format!(
                "lumos is only evaluated for at most {LUMOS_MAX_BANDS} bands, got {}",
                s.bands()
            )));
        }
        let out = solvers::run(method, &s, &cond.mixing, &solver)?;
        evaluate(gt, &out.estimate, None)
    });
    Ok(Trial { spectral_snr: spectral_snr(&raw), cells })
}

/// Runs every (value, replicate) job and aggregates replicate means.
///
/// The phantom is fixed by `phantom.rng_seed`; replicate `r` uses acquisition
/// and solver seeds offset by `r`, shared across sweep values. Failed cells
/// are kept as NaN with their error message.
pub fn run_sweep(spec: &SweepSpec) -> Result<BenchReport> {
    spec.validate()?;
    let mut gt = generate_phantom(&spec.phantom)?;
    let spectra: Vec<EmissionSpectrum> = spec.sources().iter().map(|s| s.load(None)).collect::<Result<_>>()?;

    let conditions: Vec<Result<Condition>> = spec.values.iter().map(|&v| condition(spec, &spectra, v)).collect();
    if let Some(Ok(c)) = conditions.iter().find(|c| c.is_ok()) {
        gt = ConcentrationMap::new(gt.into_data(), c.mixing.labels().to_vec())?;
    }
    let jobs = spec.values.len() * spec.replicates;
    log::info!("{} sweep: {} values x {} replicates x {} solvers", spec.axis.name(), spec.values.len(), spec.replicates, spec.solvers.len());
    let trials: Vec<Result<Trial>> = exec::map_indices(jobs, |k| {
        let (vi, r) = (k / spec.replicates, k % spec.replicates);
        match &conditions[vi] {
            Ok(cond) => run_trial(spec, &gt, cond, r),
            Err(e) => Err(Error::InvalidConfig(e.to_string())),
        }
    });

    let mut results = Vec::with_capacity(spec.values.len());
    for (vi, (&value, cond)) in spec.values.iter().zip(&conditions).enumerate() {
        let trials = &trials[vi * spec.replicates..(vi + 1) * spec.replicates];
        let (kappa, bands) = match cond {
            Ok(c) => (analyze_conditioning(&c.mixing).kappa, c.mixing.bands()),
            Err(_) => (f64::NAN, 0),
        };
        results.push(ConditionResult::aggregate(value, bands, kappa, &spec.solvers, gt.channels(), trials));
    }
    Ok(BenchReport {
        dataset: spec.dataset.clone(),
        axis: spec.axis,
        labels: gt.labels().to_vec(),
        replicates: spec.replicates,
        conditions: results,
    })
}

impl ConditionResult {
    fn aggregate(
        value: f64,
        bands: usize,
        kappa: f64,
        methods: &[Method],
        channels: usize,
        trials: &[Result<Trial>],
    ) -> Self {
        let mut errors = Vec::new();
        let mut snrs = Vec::new();
        for t in trials {
            match t {
                Ok(t) => match &t.spectral_snr {
                    Ok(v) => snrs.push(*v),
                    Err(e) => errors.push(format!("spectral_snr: {e}")),
                },
                Err(e) => errors.push(format!("acquisition: {e}")),
            }
        }
        let cells = methods
            .iter()
            .enumerate()
            .map(|(i, &method)| {
                let reports: Vec<std::result::Result<&MetricReport, String>> = trials
                    .iter()
                    .map(|t| match t {
                        Ok(t) => t.cells[i].as_ref().map_err(|e| e.to_string()),
                        Err(e) => Err(e.to_string()),
                    })
                    .collect();
                CellStats::aggregate(method, channels, &reports)
            })
            .collect();
        let (snr_mean, snr_std) = report::mean_std(&snrs);
        ConditionResult {
            value,
            bands,
            kappa,
            spectral_snr: if snrs.is_empty() { f64::NAN } else { snr_mean },
            spectral_snr_std: snr_std,
            cells,
            errors,
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;
use specmix_core::bench::{run_sweep, subtract_offset, write_outputs, SweepSpec};
use specmix_core::io::{
    read_concentration_map, read_spectral_image, write_concentration_map, write_spectral_image, Dtype,
};
use specmix_core::metrics::{evaluate as evaluate_maps, write_rows_csv};
use specmix_core::simulator::{generate_phantom, simulate_acquisition, AcquisitionConfig};
use specmix_core::solvers::{self, Method, SolverConfig, LUMOS_MAX_BANDS};
use specmix_core::{
    analyze_conditioning, build_mixing_matrix, ConcentrationMap, EmissionSpectrum, Error, MixingMatrix, SpectralImage,
};

use crate::simspec::SimSpec;

/// Column-sum tolerance accepted without `--renormalize`.
const RENORM_TOL: f64 = 1e-6;

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        let err = std::io::Error::new(std::io::ErrorKind::NotFound, format!("{}: no such file", path.display()));
        return Err(Error::Io(err).into());
    }
    Ok(())
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::Io).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::Json)?;
    fs::write(path, text + "\n").map_err(Error::Io).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Absolute directory of `spec`, against which its relative paths resolve.
pub fn absolute_base(spec: &Path) -> specmix_core::Result<PathBuf> {
    let dir = match spec.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    Ok(std::path::absolute(dir)?)
}

pub fn simulate(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    require_file(spec_path)?;
    let mut spec = SimSpec::from_json_path(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    if let Some(seed) = seed {
        spec.phantom.rng_seed = seed;
        spec.acquisition.rng_seed = seed;
    }
    let spectra: Vec<EmissionSpectrum> = spec.spectra.iter().map(|s| s.load(None)).collect::<Result<_, _>>()?;
    prepare_out_dir(out)?;

    let mixing = build_mixing_matrix(&spectra, &spec.layout)?;
    let kappa = analyze_conditioning(&mixing).kappa;
    log::info!("mixing matrix {}x{}, kappa {kappa:.3}", mixing.bands(), mixing.fluorophores());
    let gt = generate_phantom(&spec.phantom)?;
    let gt = ConcentrationMap::new(gt.into_data(), mixing.labels().to_vec())?;
    let spectral = simulate_acquisition(&gt, &mixing, &spec.acquisition)?;

    let mut gt_meta = gt.meta.clone();
    gt_meta.insert("phantom".into(), serde_json::to_value(&spec.phantom)?);
    let gt = gt.with_meta(gt_meta);
    write_concentration_map(out.join("gt.spmx"), &gt, Dtype::F32)?;
    let dtype = if spec.acquisition.quantize { Dtype::U16 } else { Dtype::F32 };
    write_spectral_image(out.join("spectral.spmx"), &spectral, dtype)?;
    mixing.write_csv_path(out.join("mixing.csv"))?;
    write_json(&out.join("manifest.json"), &spec)?;
    Ok(())
}

/// Converts detector counts back to concentration units when the image
/// carries simulator metadata.
fn to_signal(img: &SpectralImage) -> Result<(SpectralImage, f64)> {
    let offset = img.meta.get("offset").and_then(|v| v.as_f64()).unwrap_or(0.0);
    let scale = match img.meta.get("acquisition") {
        Some(v) => serde_json::from_value::<AcquisitionConfig>(v.clone())
            .map_err(|e| Error::InvalidConfig(format!("acquisition metadata: {e}")))?
            .scale(),
        None => 1.0,
    };
    let shifted = subtract_offset(img, offset);
    if scale == 1.0 {
        return Ok((shifted, scale));
    }
    let data = shifted.data().mapv(|v| v / scale);
    Ok((SpectralImage::new(data, img.layout().cloned())?.with_meta(img.meta.clone()), scale))
}

pub fn unmix(
    method: Method,
    spectral_path: &Path,
    mixing_path: &Path,
    cfg_path: Option<&Path>,
    out: &Path,
    renormalize: bool,
    seed: Option<u64>,
) -> Result<()> {
    for p in [Some(spectral_path), Some(mixing_path), cfg_path].into_iter().flatten() {
        require_file(p)?;
    }
    let mut cfg = match cfg_path {
        Some(p) => SolverConfig::from_json_path(p).with_context(|| format!("reading {}", p.display()))?,
        None => SolverConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.rng_seed = seed;
    }
    let mixing = MixingMatrix::read_csv_path(mixing_path, RENORM_TOL, renormalize)
        .with_context(|| format!("reading {}", mixing_path.display()))?;
    let raw = read_spectral_image(spectral_path).with_context(|| format!("reading {}", spectral_path.display()))?;
    if raw.bands() != mixing.bands() {
        return Err(Error::ShapeMismatch(format!(
            "{} has {} bands, {} has {}",
            spectral_path.display(),
            raw.bands(),
            mixing_path.display(),
            mixing.bands()
        ))
        .into());
    }
    if method == Method::Lumos && raw.bands() > LUMOS_MAX_BANDS {
        log::warn!(
            "lumos targets at most {LUMOS_MAX_BANDS} detection bands; running on {} bands anyway",
            raw.bands()
        );
    }
    prepare_out_dir(out)?;

    let (signal, scale) = to_signal(&raw)?;
    let result = solvers::run(method, &signal, &mixing, &cfg)?;
    let mut meta = result.estimate.meta.clone();
    meta.insert("method".into(), json!(method.name()));
    meta.insert("solver_config".into(), serde_json::to_value(&cfg)?);
    meta.insert("input_scale".into(), json!(scale));
    let est = result.estimate.with_meta(meta);
    write_concentration_map(out.join(format!("est_{}.spmx", method.name())), &est, Dtype::F32)?;
    if let Some(refined) = result.refined_mixing {
        refined.write_csv_path(out.join(format!("mixing_{}.csv", method.name())))?;
    }
    Ok(())
}

pub fn evaluate(gt_path: &Path, est_path: &Path, spectral_path: Option<&Path>, out: &Path) -> Result<()> {
    for p in [Some(gt_path), Some(est_path), spectral_path].into_iter().flatten() {
        require_file(p)?;
    }
    let gt = read_concentration_map(gt_path).with_context(|| format!("reading {}", gt_path.display()))?;
    let est = read_concentration_map(est_path).with_context(|| format!("reading {}", est_path.display()))?;
    let spectral = match spectral_path {
        Some(p) => Some(read_spectral_image(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    if gt.channels() != est.channels() || gt.dims() != est.dims() {
        return Err(Error::ShapeMismatch(format!(
            "ground truth is {}x{:?}, estimate is {}x{:?}",
            gt.channels(),
            gt.dims(),
            est.channels(),
            est.dims()
        ))
        .into());
    }
    prepare_out_dir(out)?;

    let report = evaluate_maps(&gt, &est, spectral.as_ref())?;
    for e in &report.errors {
        log::warn!("{e}");
    }
    let method = est.meta.get("method").and_then(|v| v.as_str()).unwrap_or("unknown");
    let dataset = gt_path.parent().and_then(|p| p.file_name()).and_then(|n| n.to_str()).unwrap_or("");
    write_json(&out.join("metrics.json"), &report)?;
    let file = fs::File::create(out.join("metrics.csv")).map_err(Error::Io)?;
    write_rows_csv(std::io::BufWriter::new(file), &report.rows(dataset, method, "", ""))?;
    Ok(())
}

pub fn analyze(mixing_path: &Path, renormalize: bool, out: Option<&Path>) -> Result<()> {
    require_file(mixing_path)?;
    let mixing = MixingMatrix::read_csv_path(mixing_path, RENORM_TOL, renormalize)
        .with_context(|| format!("reading {}", mixing_path.display()))?;
    let report = analyze_conditioning(&mixing);
    if report.rank_deficient {
        log::warn!("mixing matrix is rank deficient");
    }
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(path) = out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            prepare_out_dir(dir)?;
        }
        fs::write(path, text + "\n").map_err(Error::Io)?;
    }
    Ok(())
}

pub fn bench(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    require_file(spec_path)?;
    let mut spec = SweepSpec::from_json_path(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let base = absolute_base(spec_path)?;
    spec.spectra = spec.spectra.iter().map(|s| s.absolutized(&base)).collect();
    if let Some(seed) = seed {
        spec.phantom.rng_seed = seed;
        spec.acquisition.rng_seed = seed;
        spec.solver.rng_seed = seed;
    }
    prepare_out_dir(out)?;
    let report = run_sweep(&spec)?;
    write_outputs(&report, out)?;
    write_json(&out.join("manifest.json"), &spec)?;
    Ok(())
}


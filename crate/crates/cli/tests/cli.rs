use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use specmix_core::io::{read_concentration_map, read_spectral_image};
use tempfile::TempDir;

fn specmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specmix")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = specmix(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_spec(dir: &Path, name: &str, spec: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(spec).unwrap()).unwrap();
    path
}

fn sim_spec(exposure_ms: f64, noiseless: bool) -> Value {
    json!({
        "phantom": {"kind": "mixed", "dims": [1, 64, 64], "fluorophores": 3, "rng_seed": 5},
        "acquisition": {"exposure_ms": exposure_ms, "noiseless": noiseless, "rng_seed": 9}
    })
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn simulate(dir: &Path, name: &str, spec: &Value) -> PathBuf {
    let spec_path = write_spec(dir, &format!("{name}.json"), spec);
    let out = dir.join(name);
    ok(&["simulate", "--spec", p(&spec_path), "--out", p(&out)]);
    out
}

fn mean_psnr(metrics: &Path) -> f64 {
    let v = read_json(metrics);
    match &v["mean"]["psnr_ri"] {
        Value::String(s) if s == "inf" => f64::INFINITY,
        other => other.as_f64().unwrap(),
    }
}

#[test]
fn simulate_writes_four_files_and_echoes_seed() {
    let tmp = TempDir::new().unwrap();
    let spec_path = write_spec(tmp.path(), "sim.json", &sim_spec(20.0, false));
    let out = tmp.path().join("run");
    ok(&["simulate", "--spec", p(&spec_path), "--out", p(&out), "--seed", "42"]);
    for f in ["gt.spmx", "spectral.spmx", "mixing.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["phantom"]["rng_seed"], 42);
    assert_eq!(manifest["acquisition"]["rng_seed"], 42);
    assert_eq!(manifest["spectra"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["layout"]["bands"].as_array().unwrap().len(), 32);
}

#[test]
fn missing_spectrum_file_names_the_fluorophore() {
    let tmp = TempDir::new().unwrap();
    let mut spec = sim_spec(20.0, false);
    spec["phantom"]["fluorophores"] = json!(2);
    spec["spectra"] = json!([{"name": "egfp"}, {"name": "janelia646", "path": "spectra/janelia646.csv"}]);
    let spec_path = write_spec(tmp.path(), "sim.json", &spec);
    let out = specmix(&["simulate", "--spec", p(&spec_path), "--out", p(&tmp.path().join("run"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("janelia646"));
}

#[test]
fn spectrum_paths_resolve_against_the_spec_directory() {
    let tmp = TempDir::new().unwrap();
    fs::create_dir(tmp.path().join("spectra")).unwrap();
    let csv: String = std::iter::once("wavelength_nm,intensity\n".to_string())
        .chain((0..=60).map(|i| {
            let w = 480.0 + 5.0 * i as f64;
            format!("{w},{}\n", (-((w - 600.0) / 30.0).powi(2)).exp())
        }))
        .collect();
    fs::write(tmp.path().join("spectra/red.csv"), csv).unwrap();
    let mut spec = sim_spec(20.0, false);
    spec["phantom"]["fluorophores"] = json!(2);
    spec["spectra"] = json!([{"name": "egfp"}, {"name": "red", "path": "spectra/red.csv"}]);
    let spec_path = write_spec(tmp.path(), "sim.json", &spec);
    let out = tmp.path().join("run");
    ok(&["simulate", "--spec", p(&spec_path), "--out", p(&out)]);
    let manifest = read_json(&out.join("manifest.json"));
    let path = PathBuf::from(manifest["spectra"][1]["path"].as_str().unwrap());
    assert!(path.is_absolute());
    assert_eq!(fs::read(path).unwrap(), fs::read(tmp.path().join("spectra/red.csv")).unwrap());
}

#[test]
fn spec_given_as_bare_file_name() {
    let tmp = TempDir::new().unwrap();
    write_spec(tmp.path(), "sim.json", &sim_spec(20.0, false));
    let out = Command::new(env!("CARGO_BIN_EXE_specmix"))
        .args(["simulate", "--spec", "sim.json", "--out", "run"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("run/spectral.spmx").is_file());
}

#[test]
fn rerun_from_manifest_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let mut spec = sim_spec(20.0, false);
    spec["acquisition"]["quantize"] = json!(true);
    let first = simulate(tmp.path(), "first", &spec);
    let manifest = first.join("manifest.json");
    let second = tmp.path().join("second");
    ok(&["simulate", "--spec", p(&manifest), "--out", p(&second)]);
    for f in ["spectral.spmx", "gt.spmx", "mixing.csv", "manifest.json"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f} differs");
    }
    assert!(fs::read(first.join("spectral.spmx")).unwrap().windows(5).any(|w| w == b"\"u16\""));
}

#[test]
fn lu_on_noise_free_data_recovers_ground_truth() {
    let tmp = TempDir::new().unwrap();
    let run = simulate(tmp.path(), "run", &sim_spec(20.0, true));
    ok(&["unmix", "--method", "lu", p(&run.join("spectral.spmx")), p(&run.join("mixing.csv")), "--out", p(&run)]);
    let gt = read_concentration_map(run.join("gt.spmx")).unwrap();
    let est = read_concentration_map(run.join("est_lu.spmx")).unwrap();
    let err = gt.data().iter().zip(est.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-6, "max error {err:e}");
    assert_eq!(est.meta["method"], "lu");
    assert_eq!(est.labels(), gt.labels());
}

#[test]
fn nnlu_writes_solver_metadata_and_nmf_writes_refined_mixing() {
    let tmp = TempDir::new().unwrap();
    let run = simulate(tmp.path(), "run", &sim_spec(20.0, false));
    let cfg = write_spec(tmp.path(), "solver.json", &json!({"nmf_iters": 20}));
    for method in ["nnlu", "nmf-ri"] {
        ok(&[
            "unmix", "--method", method, p(&run.join("spectral.spmx")), p(&run.join("mixing.csv")),
            "--spec", p(&cfg), "--out", p(&run),
        ]);
    }
    let nnlu = read_concentration_map(run.join("est_nnlu.spmx")).unwrap();
    assert!(nnlu.meta.contains_key("admm_converged_fraction"));
    assert!(nnlu.meta.contains_key("admm_max_iterations"));
    let nmf = read_concentration_map(run.join("est_nmf-ri.spmx")).unwrap();
    assert_eq!(nmf.meta["nmf_iterations"], 20);
    assert_eq!(nmf.meta["solver_config"]["nmf_iters"], 20);
    assert!(run.join("mixing_nmf-ri.csv").is_file());
}

#[test]
fn unmix_rejects_unknown_method_and_band_mismatch() {
    let tmp = TempDir::new().unwrap();
    let run = simulate(tmp.path(), "run", &sim_spec(20.0, false));
    let spectral = run.join("spectral.spmx");
    let out = specmix(&["unmix", "--method", "pca", p(&spectral), p(&run.join("mixing.csv")), "--out", p(&run)]);
    assert_eq!(code(&out), 2);

    let mut small = sim_spec(20.0, false);
    small["layout"] = json!({"bands": [[450, 500], [500, 550], [550, 600], [600, 650]]});
    let other = simulate(tmp.path(), "other", &small);
    let out = specmix(&["unmix", "--method", "lu", p(&spectral), p(&other.join("mixing.csv")), "--out", p(&run)]);
    assert_eq!(code(&out), 4);

    let out = specmix(&["unmix", "--method", "lu", p(&run.join("absent.spmx")), p(&run.join("mixing.csv")), "--out", p(&run)]);
    assert_eq!(code(&out), 3);
}

#[test]
fn lumos_on_many_bands_warns_and_runs() {
    let tmp = TempDir::new().unwrap();
    let run = simulate(tmp.path(), "run", &sim_spec(20.0, false));
    let out = ok(&["unmix", "--method", "lumos", p(&run.join("spectral.spmx")), p(&run.join("mixing.csv")), "--out", p(&run)]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("WARN") && stderr.contains("32 bands"), "{stderr}");
    assert!(run.join("est_lumos.spmx").is_file());
}

#[test]
fn evaluate_identity_and_scaled_estimates() {
    let tmp = TempDir::new().unwrap();
    let mut spec = sim_spec(20.0, false);
    spec["phantom"]["dims"] = json!([1, 128, 128]);
    let run = simulate(tmp.path(), "run", &spec);
    let gt = run.join("gt.spmx");
    ok(&["evaluate", p(&gt), p(&gt), p(&run.join("spectral.spmx")), "--out", p(&tmp.path().join("same"))]);
    let same = read_json(&tmp.path().join("same/metrics.json"));
    assert_eq!(same["mean"]["psnr_ri"], "inf");
    assert_eq!(same["mean"]["ms_ssim_ri"].as_f64().unwrap(), 1.0);
    assert!(same["spectral_snr"].as_f64().unwrap() > 0.0);
    let csv = fs::read_to_string(tmp.path().join("same/metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 + 1);

    let map = read_concentration_map(&gt).unwrap();
    let doubled = specmix_core::ConcentrationMap::new(map.data().mapv(|v| 2.0 * v), map.labels().to_vec()).unwrap();
    let doubled_path = tmp.path().join("doubled.spmx");
    specmix_core::io::write_concentration_map(&doubled_path, &doubled, specmix_core::io::Dtype::F32).unwrap();
    ok(&["evaluate", p(&gt), p(&doubled_path), p(&run.join("spectral.spmx")), "--out", p(&tmp.path().join("doubled"))]);
    let doubled = read_json(&tmp.path().join("doubled/metrics.json"));
    assert_eq!(doubled["mean"], same["mean"]);
    assert_eq!(doubled["per_channel"], same["per_channel"]);
}

#[test]
fn evaluate_rejects_shape_mismatch() {
    let tmp = TempDir::new().unwrap();
    let a = simulate(tmp.path(), "a", &sim_spec(20.0, false));
    let mut spec = sim_spec(20.0, false);
    spec["phantom"]["dims"] = json!([1, 32, 32]);
    let b = simulate(tmp.path(), "b", &spec);
    let out = specmix(&["evaluate", p(&a.join("gt.spmx")), p(&b.join("gt.spmx")), "--out", p(tmp.path())]);
    assert_eq!(code(&out), 4);
    let out = specmix(&["evaluate", p(&a.join("gt.spmx")), p(&a.join("mixing.csv")), "--out", p(tmp.path())]);
    assert_eq!(code(&out), 4);
}

#[test]
fn shorter_exposure_gives_lower_psnr() {
    let tmp = TempDir::new().unwrap();
    let mut psnr = Vec::new();
    for (name, ms) in [("short", 2.0), ("long", 20.0)] {
        let run = simulate(tmp.path(), name, &sim_spec(ms, false));
        ok(&["unmix", "--method", "lu", p(&run.join("spectral.spmx")), p(&run.join("mixing.csv")), "--out", p(&run)]);
        ok(&["evaluate", p(&run.join("gt.spmx")), p(&run.join("est_lu.spmx")), "--out", p(&run)]);
        psnr.push(mean_psnr(&run.join("metrics.json")));
    }
    assert!(psnr[0] < psnr[1], "{psnr:?}");
}

fn mixing_csv(dir: &Path, name: &str, rows: &[&[f64]]) -> PathBuf {
    let f = rows[0].len();
    let mut text = String::from("band,lo_nm,hi_nm");
    for j in 0..f {
        text += &format!(",c{j}");
    }
    text.push('\n');
    for (i, row) in rows.iter().enumerate() {
        text += &format!("{i},{},{}", 500 + 10 * i, 510 + 10 * i);
        for v in *row {
            text += &format!(",{v}");
        }
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn analyze(args: &[&str]) -> Value {
    let out = ok(args);
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn analyze_identity_and_duplicate_columns() {
    let tmp = TempDir::new().unwrap();
    let eye = mixing_csv(tmp.path(), "eye.csv", &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
    let out_path = tmp.path().join("reports/eye.json");
    let report = analyze(&["analyze", p(&eye), "--out", p(&out_path)]);
    assert!((report["kappa"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(report["rank_deficient"], false);
    assert_eq!(read_json(&out_path), report);

    let dup = mixing_csv(tmp.path(), "dup.csv", &[&[0.5, 0.5, 0.0], &[0.5, 0.5, 0.0], &[0.0, 0.0, 1.0]]);
    let report = analyze(&["analyze", p(&dup)]);
    assert_eq!(report["rank_deficient"], true);
}

#[test]
fn analyze_rejects_unnormalized_columns_unless_asked() {
    let tmp = TempDir::new().unwrap();
    let path = mixing_csv(tmp.path(), "raw.csv", &[&[2.0, 0.0], &[2.0, 1.0], &[0.0, 3.0]]);
    assert_eq!(code(&specmix(&["analyze", p(&path)])), 2);
    let report = analyze(&["analyze", p(&path), "--renormalize"]);
    assert!(report["kappa"].as_f64().unwrap().is_finite());

    let near = mixing_csv(tmp.path(), "near.csv", &[&[0.5000004, 0.0], &[0.5, 1.0]]);
    analyze(&["analyze", p(&near)]);

    let broken = tmp.path().join("broken.csv");
    fs::write(&broken, "band,lo_nm,hi_nm,a\n0,500,510,zero\n").unwrap();
    assert_eq!(code(&specmix(&["analyze", p(&broken)])), 2);
    assert_eq!(code(&specmix(&["analyze", p(&tmp.path().join("absent.csv"))])), 3);
}

#[test]
fn closer_peaks_give_larger_condition_number() {
    let tmp = TempDir::new().unwrap();
    let mut kappa = Vec::new();
    for delta in [2.0, 50.0] {
        let mut spec = sim_spec(20.0, false);
        spec["phantom"]["fluorophores"] = json!(2);
        spec["spectra"] = json!([
            {"name": "a", "parametric": {"peak_nm": 540.0, "width_nm": 40.0, "skew": 0.0}},
            {"name": "b", "parametric": {"peak_nm": 540.0 + delta, "width_nm": 40.0, "skew": 0.0}},
        ]);
        let run = simulate(tmp.path(), &format!("d{delta}"), &spec);
        kappa.push(analyze(&["analyze", p(&run.join("mixing.csv"))])["kappa"].as_f64().unwrap());
    }
    assert!(kappa[0] > kappa[1], "{kappa:?}");
}

#[test]
fn bench_writes_tables_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let spec = json!({
        "axis": "exposure",
        "values": [2.0, 20.0],
        "phantom": {"kind": "blobs", "dims": [1, 64, 64], "fluorophores": 2},
        "solvers": ["lu", "nnlu"],
    });
    let spec_path = write_spec(tmp.path(), "sweep.json", &spec);
    let out = tmp.path().join("bench");
    ok(&["bench", "--spec", p(&spec_path), "--out", p(&out), "--seed", "3", "--threads", "2"]);
    for f in ["table_exposure.csv", "table_exposure.json", "summary.json", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert_eq!(read_json(&out.join("manifest.json"))["acquisition"]["rng_seed"], 3);
}

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&specmix(&["simulate", "--out", p(tmp.path())])), 2);
    assert_eq!(code(&specmix(&["frobnicate"])), 2);
    let bad = write_spec(tmp.path(), "bad.json", &json!({"phantom": {"kind": "blobs", "dims": [1, 4, 4], "fluorophores": 1}}));
    assert_eq!(code(&specmix(&["simulate", "--spec", p(&bad), "--out", p(tmp.path())])), 2);
    let extra = write_spec(tmp.path(), "extra.json", &json!({"phantom": {"kind": "blobs", "dims": [1, 8, 8], "fluorophores": 1}, "colour": 1}));
    assert_eq!(code(&specmix(&["simulate", "--spec", p(&extra), "--out", p(tmp.path())])), 2);
    assert_eq!(code(&specmix(&["simulate", "--spec", p(&tmp.path().join("absent.json")), "--out", p(tmp.path())])), 3);
    assert_eq!(code(&specmix(&["analyze", "x.csv", "--threads", "0"])), 2);
}

#[test]
fn spectral_container_keeps_acquisition_metadata() {
    let tmp = TempDir::new().unwrap();
    let run = simulate(tmp.path(), "run", &sim_spec(20.0, false));
    let img = read_spectral_image(run.join("spectral.spmx")).unwrap();
    assert_eq!(img.meta["offset"], 100.0);
    assert_eq!(img.meta["acquisition"]["exposure_ms"], 20.0);
    assert_eq!(img.layout().unwrap().len(), 32);
}

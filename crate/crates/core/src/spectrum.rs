//! Emission spectra: tabulated profiles, the parametric family used in place
//! of database spectra, CSV I/O and rigid wavelength shifts.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tabulated emission profile, linearly interpolated between samples and zero
/// outside the tabulated range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionSpectrum {
    name: String,
    samples: Vec<(f64, f64)>,
}

impl EmissionSpectrum {
    pub fn new(name: impl Into<String>, samples: Vec<(f64, f64)>) -> Result<Self> {
        let name = name.into();
        let bad = |reason: &str| Error::MalformedSpectrum { name: name.clone(), reason: reason.into() };
        if samples.len() < 2 {
            return Err(bad("at least two samples are required"));
        }
        if samples.iter().any(|&(w, v)| !w.is_finite() || !v.is_finite()) {
            return Err(bad("non-finite sample"));
        }
        if samples.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(bad("wavelengths must be strictly increasing"));
        }
        if samples.iter().any(|&(_, v)| v < 0.0) {
            return Err(bad("negative intensity"));
        }
        if samples.iter().all(|&(_, v)| v == 0.0) {
            return Err(bad("all intensities are zero"));
        }
        Ok(Self { name, samples })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Wavelength range covered by the samples.
    pub fn range(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    /// Linearly interpolated intensity at `wavelength`.
    pub fn intensity_at(&self, wavelength: f64) -> f64 {
        let s = &self.samples;
        let (lo, hi) = self.range();
        if wavelength < lo || wavelength > hi {
            return 0.0;
        }
        let i = s.partition_point(|&(w, _)| w <= wavelength);
        if i == 0 {
            return s[0].1;
        }
        if i == s.len() {
            return s[s.len() - 1].1;
        }
        let (w0, v0) = s[i - 1];
        let (w1, v1) = s[i];
        v0 + (v1 - v0) * (wavelength - w0) / (w1 - w0)
    }

    /// Exact integral of the piecewise-linear profile over `[lo, hi]`
    /// (trapezoid rule on every clipped segment).
    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        self.samples
            .windows(2)
            .map(|seg| {
                let a = seg[0].0.max(lo);
                let b = seg[1].0.min(hi);
                if b <= a {
                    return 0.0;
                }
                let interp = |w: f64| seg[0].1 + (seg[1].1 - seg[0].1) * (w - seg[0].0) / (seg[1].0 - seg[0].0);
                0.5 * (interp(a) + interp(b)) * (b - a)
            })
            .sum()
    }

    /// Rigid translation of the wavelength axis by `delta_nm`.
    pub fn shifted(&self, delta_nm: f64) -> Self {
        Self {
            name: self.name.clone(),
            samples: self.samples.iter().map(|&(w, v)| (w + delta_nm, v)).collect(),
        }
    }

    /// Reads a `wavelength_nm,intensity` CSV with a header row.
    pub fn from_csv_reader(name: impl Into<String>, reader: impl Read) -> Result<Self> {
        let name = name.into();
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "wavelength_nm" || &headers[1] != "intensity" {
            return Err(Error::MalformedSpectrum {
                name,
                reason: "expected header `wavelength_nm,intensity`".into(),
            });
        }
        let mut samples = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let parse = |field: &str| {
                field.parse::<f64>().map_err(|_| Error::MalformedSpectrum {
                    name: name.clone(),
                    reason: format!("cannot parse `{field}` as a number"),
                })
            };
            samples.push((parse(&record[0])?, parse(&record[1])?));
        }
        Self::new(name, samples)
    }

    pub fn from_csv_path(name: impl Into<String>, path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(name, file)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["wavelength_nm", "intensity"])?;
        for &(wl, v) in &self.samples {
            w.write_record([wl.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Tabulates a parametric profile on a 0.5 nm grid.
    pub fn parametric(name: impl Into<String>, params: ParametricSpectrum) -> Result<Self> {
        params.validate()?;
        let start = ((params.peak_nm - 3.0 * params.width_nm) * 2.0).floor() / 2.0;
        let end = ((params.peak_nm + 5.0 * params.width_nm) * 2.0).ceil() / 2.0;
        let n = ((end - start) * 2.0).round() as usize + 1;
        let samples = (0..n)
            .map(|i| {
                let w = start + i as f64 * 0.5;
                (w, params.eval(w))
            })
            .collect();
        Self::new(name, samples)
    }
}

/// Where a fluorophore's spectrum comes from in JSON configs: a CSV file
/// (`path`, relative paths resolved against a base directory), explicit
/// parametric values, or a named preset (`preset`, defaulting to `name`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSource {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parametric: Option<ParametricSpectrum>,
}

impl SpectrumSource {
    pub fn preset(name: &str) -> Self {
        Self { name: name.into(), path: None, preset: None, parametric: None }
    }

    pub fn load(&self, base_dir: Option<&Path>) -> Result<EmissionSpectrum> {
        let set = [self.path.is_some(), self.preset.is_some(), self.parametric.is_some()];
        if set.iter().filter(|&&b| b).count() > 1 {
            return Err(Error::MalformedSpectrum {
                name: self.name.clone(),
                reason: "set at most one of `path`, `preset`, `parametric`".into(),
            });
        }
        if let Some(path) = &self.path {
            let full = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path.clone(),
            };
            let file = std::fs::File::open(&full).map_err(|e| Error::MissingSpectrum {
                name: self.name.clone(),
                path: full.display().to_string(),
                reason: e.to_string(),
            })?;
            return EmissionSpectrum::from_csv_reader(self.name.clone(), file);
        }
        if let Some(p) = self.parametric {
            return EmissionSpectrum::parametric(self.name.clone(), p);
        }
        let key = self.preset.as_deref().unwrap_or(&self.name);
        let params = ParametricSpectrum::preset(key).ok_or_else(|| Error::MalformedSpectrum {
            name: self.name.clone(),
            reason: format!("unknown preset `{key}`"),
        })?;
        EmissionSpectrum::parametric(self.name.clone(), params)
    }

    /// Same source with a relative `path` made absolute against `base_dir`.
    pub fn absolutized(&self, base_dir: &Path) -> Self {
        let mut out = self.clone();
        if let Some(p) = &self.path {
            if p.is_relative() {
                out.path = Some(base_dir.join(p));
            }
        }
        out
    }
}

/// Skewed log-normal (Fraser-Suzuki) emission line shape.
///
/// `width_nm` is the full width at half maximum, `skew` > 0 produces the red
/// tail typical of fluorescent proteins; `skew = 0` is a Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametricSpectrum {
    pub peak_nm: f64,
    pub width_nm: f64,
    #[serde(default)]
    pub skew: f64,
}

impl ParametricSpectrum {
    pub fn new(peak_nm: f64, width_nm: f64, skew: f64) -> Self {
        Self { peak_nm, width_nm, skew }
    }

    fn validate(&self) -> Result<()> {
        if !(self.peak_nm.is_finite() && self.width_nm.is_finite() && self.width_nm > 0.0 && self.skew.is_finite()) {
            return Err(Error::MalformedSpectrum {
                name: format!("parametric@{}", self.peak_nm),
                reason: "peak, width and skew must be finite with width > 0".into(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, wavelength: f64) -> f64 {
        let x = (wavelength - self.peak_nm) / self.width_nm;
        let ln2 = std::f64::consts::LN_2;
        if self.skew.abs() < 1e-9 {
            return (-4.0 * ln2 * x * x).exp();
        }
        let arg = 1.0 + 2.0 * self.skew * x;
        if arg <= 0.0 {
            return 0.0;
        }
        let t = arg.ln() / self.skew;
        (-ln2 * t * t).exp()
    }

    /// Approximate shapes of common fluorescent proteins.
    pub fn preset(name: &str) -> Option<Self> {
        let p = match name.to_ascii_lowercase().as_str() {
            "mturquoise" | "mturquoise2" => Self::new(474.0, 55.0, 0.35),
            "egfp" => Self::new(507.0, 38.0, 0.3),
            "mvenus" | "eyfp" => Self::new(528.0, 36.0, 0.3),
            "tdtomato" => Self::new(581.0, 42.0, 0.3),
            "mcherry" => Self::new(610.0, 48.0, 0.25),
            _ => return None,
        };
        Some(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(
            EmissionSpectrum::new("a", vec![(500.0, 1.0)]),
            Err(Error::MalformedSpectrum { .. })
        ));
        assert!(EmissionSpectrum::new("a", vec![(500.0, 1.0), (500.0, 2.0)]).is_err());
        assert!(EmissionSpectrum::new("a", vec![(510.0, 1.0), (500.0, 2.0)]).is_err());
        assert!(EmissionSpectrum::new("a", vec![(500.0, 0.0), (510.0, 0.0)]).is_err());
    }

    #[test]
    fn interpolation_and_integral() {
        let s = EmissionSpectrum::new("ramp", vec![(500.0, 0.0), (600.0, 2.0)]).unwrap();
        assert_eq!(s.intensity_at(550.0), 1.0);
        assert_eq!(s.intensity_at(499.0), 0.0);
        assert!((s.integrate(500.0, 550.0) - 25.0).abs() < 1e-12);
        assert!((s.integrate(400.0, 700.0) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn shift_round_trip_is_exact() {
        let s = EmissionSpectrum::parametric("egfp", ParametricSpectrum::preset("egfp").unwrap()).unwrap();
        assert_eq!(s.shifted(0.0), s);
        assert_eq!(s.shifted(50.0).shifted(-50.0), s);
    }

    #[test]
    fn parametric_peak_and_half_width() {
        let p = ParametricSpectrum::new(507.0, 38.0, 0.3);
        assert!((p.eval(507.0) - 1.0).abs() < 1e-12);
        // half maximum where ln(1 + 2bx) = +-b
        let lo = 507.0 + 38.0 * ((-0.3f64).exp() - 1.0) / 0.6;
        let hi = 507.0 + 38.0 * (0.3f64.exp() - 1.0) / 0.6;
        assert!((p.eval(lo) - 0.5).abs() < 1e-9);
        assert!((p.eval(hi) - 0.5).abs() < 1e-9);
        assert!(hi - 507.0 > 507.0 - lo, "red tail");
    }

    #[test]
    fn csv_round_trip() {
        let s = EmissionSpectrum::new("x", vec![(500.0, 0.25), (501.5, 1.0), (503.0, 0.0)]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"wavelength_nm,intensity\n"));
        let back = EmissionSpectrum::from_csv_reader("x", buf.as_slice()).unwrap();
        assert_eq!(back, s);
        assert!(EmissionSpectrum::from_csv_reader("x", &b"nm,val\n1,2\n3,4\n"[..]).is_err());
    }
}

//! The mixing matrix and the forward ("spectral mixer") model `S = M U`.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;
use ndarray::{Array4, Axis};

use crate::bands::{validate_partition, BandLayout};
use crate::image::{ConcentrationMap, SpectralImage};
use crate::spectrum::EmissionSpectrum;
use crate::{Error, Result};

/// Column-sum tolerance of a valid mixing matrix.
pub const COLUMN_SUM_TOL: f64 = 1e-9;

/// `L x F` matrix of l1-normalised discretised emission spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    m: DMatrix<f64>,
    labels: Vec<String>,
    layout: Option<BandLayout>,
}

impl MixingMatrix {
    /// Wraps `m` after checking non-negativity and unit column sums.
    pub fn new(m: DMatrix<f64>, labels: Vec<String>, layout: Option<BandLayout>) -> Result<Self> {
        Self::check_shape(&m, &labels, layout.as_ref())?;
        for (j, col) in m.column_iter().enumerate() {
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > COLUMN_SUM_TOL {
                return Err(Error::InvalidMixingMatrix(format!("column {j} sums to {sum}, expected 1")));
            }
        }
        Ok(Self { m, labels, layout })
    }

    /// Divides every column by its sum. Fails on all-zero columns.
    pub fn normalized(mut m: DMatrix<f64>, labels: Vec<String>, layout: Option<BandLayout>) -> Result<Self> {
        Self::check_shape(&m, &labels, layout.as_ref())?;
        for (j, mut col) in m.column_iter_mut().enumerate() {
            let sum: f64 = col.iter().sum();
            if sum <= 0.0 {
                return Err(Error::InvalidMixingMatrix(format!("column {j} is all zero")));
            }
            col /= sum;
        }
        Ok(Self { m, labels, layout })
    }

    fn check_shape(m: &DMatrix<f64>, labels: &[String], layout: Option<&BandLayout>) -> Result<()> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidMixingMatrix("empty matrix".into()));
        }
        if labels.len() != m.ncols() {
            return Err(Error::InvalidMixingMatrix(format!("{} labels for {} columns", labels.len(), m.ncols())));
        }
        if let Some(l) = layout {
            if l.len() != m.nrows() {
                return Err(Error::InvalidMixingMatrix(format!("{} bands for {} rows", l.len(), m.nrows())));
            }
        }
        if m.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidMixingMatrix("entries must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Builds from rows of an `L x F` table, labelling columns `c0, c1, ...`.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let f = rows.first().map_or(0, |r| r.len());
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        if flat.len() != rows.len() * f {
            return Err(Error::InvalidMixingMatrix("ragged rows".into()));
        }
        let labels = (0..f).map(|j| format!("c{j}")).collect();
        Self::new(DMatrix::from_row_slice(rows.len(), f, &flat), labels, None)
    }

    pub fn bands(&self) -> usize {
        self.m.nrows()
    }

    pub fn fluorophores(&self) -> usize {
        self.m.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn get(&self, band: usize, fluor: usize) -> f64 {
        self.m[(band, fluor)]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.m.column(j).iter().copied().collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn layout(&self) -> Option<&BandLayout> {
        self.layout.as_ref()
    }

    /// Photon-conserving band merge: each output row is the sum of its
    /// group's rows, so columns stay l1-normalised.
    pub fn rebinned(&self, groups: &[Range<usize>]) -> Result<Self> {
        validate_partition(groups, self.bands())?;
        let f = self.fluorophores();
        let m = DMatrix::from_fn(groups.len(), f, |g, j| groups[g].clone().map(|l| self.m[(l, j)]).sum());
        let layout = self.layout.as_ref().map(|l| l.merged(groups)).transpose()?;
        Self::normalized(m, self.labels.clone(), layout)
    }

    /// Writes `band,lo_nm,hi_nm,<label>...` with one row per band.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let mut header = vec!["band".to_string(), "lo_nm".into(), "hi_nm".into()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for l in 0..self.bands() {
            let (lo, hi) = match &self.layout {
                Some(layout) => (layout.bands()[l].0.to_string(), layout.bands()[l].1.to_string()),
                None => (String::new(), String::new()),
            };
            let mut row = vec![l.to_string(), lo, hi];
            row.extend((0..self.fluorophores()).map(|j| self.m[(l, j)].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(file)
    }

    /// Reads the CSV written by [`MixingMatrix::write_csv`].
    ///
    /// Columns within `renorm_tol` of unit sum are renormalised exactly;
    /// larger deviations are an error unless `force_renormalize` is set.
    pub fn read_csv(reader: impl Read, renorm_tol: f64, force_renormalize: bool) -> Result<Self> {
        let bad = |msg: String| Error::InvalidMixingMatrix(msg);
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 4 || &headers[0] != "band" || &headers[1] != "lo_nm" || &headers[2] != "hi_nm" {
            return Err(bad("expected header `band,lo_nm,hi_nm,<fluorophore>...`".into()));
        }
        let labels: Vec<String> = headers.iter().skip(3).map(str::to_string).collect();
        let f = labels.len();
        let mut values = Vec::new();
        let mut bands = Vec::new();
        let mut has_layout = true;
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != f + 3 {
                return Err(bad(format!("row {row} has {} fields, expected {}", record.len(), f + 3)));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("row {row}: cannot parse `{s}`")));
            if record[1].is_empty() || record[2].is_empty() {
                has_layout = false;
            } else {
                bands.push((num(&record[1])?, num(&record[2])?));
            }
            for field in record.iter().skip(3) {
                values.push(num(field)?);
            }
        }
        let l = values.len() / f.max(1);
        if l == 0 {
            return Err(bad("no band rows".into()));
        }
        let layout = if has_layout { Some(BandLayout::new(bands)?) } else { None };
        let m = DMatrix::from_row_slice(l, f, &values);
        Self::check_shape(&m, &labels, layout.as_ref())?;
        let worst = m.column_iter().map(|c| (c.sum() - 1.0).abs()).fold(0.0, f64::max);
        if worst <= COLUMN_SUM_TOL {
            Self::new(m, labels, layout)
        } else if worst <= renorm_tol || force_renormalize {
            Self::normalized(m, labels, layout)
        } else {
            Err(bad(format!("column sums deviate from 1 by up to {worst:e}")))
        }
    }

    pub fn read_csv_path(path: impl AsRef<Path>, renorm_tol: f64, force_renormalize: bool) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, renorm_tol, force_renormalize)
    }
}

/// Band-averaged emission of `spec` over each band of `layout`, l1-normalised.
///
/// Band `l` receives the integral of the piecewise-linear profile over the
/// band divided by the band width.
pub fn discretize_spectrum(spec: &EmissionSpectrum, layout: &BandLayout) -> Result<Vec<f64>> {
    let col: Vec<f64> = layout.bands().iter().map(|&(lo, hi)| spec.integrate(lo, hi) / (hi - lo)).collect();
    let total: f64 = col.iter().sum();
    if total <= 0.0 {
        return Err(Error::NoOverlap { name: spec.name().to_string() });
    }
    Ok(col.into_iter().map(|v| v / total).collect())
}

/// Stacks the discretised spectra as columns of the mixing matrix.
pub fn build_mixing_matrix(specs: &[EmissionSpectrum], layout: &BandLayout) -> Result<MixingMatrix> {
    if specs.is_empty() {
        return Err(Error::InvalidMixingMatrix("no spectra".into()));
    }
    let l = layout.len();
    let mut m = DMatrix::zeros(l, specs.len());
    for (j, spec) in specs.iter().enumerate() {
        let col = discretize_spectrum(spec, layout)?;
        m.set_column(j, &nalgebra::DVector::from_vec(col));
    }
    let labels = specs.iter().map(|s| s.name().to_string()).collect();
    MixingMatrix::new(m, labels, Some(layout.clone()))
}

/// Noise-free forward model: `out[l, p] = sum_j m[l][j] * u[j, p]`, the sum
/// running over `j` in ascending order for every voxel.
pub fn mix_forward(u: &ConcentrationMap, m: &MixingMatrix) -> Result<SpectralImage> {
    if u.channels() != m.fluorophores() {
        return Err(Error::ShapeMismatch(format!(
            "mixing matrix has {} columns, concentration map {} channels",
            m.fluorophores(),
            u.channels()
        )));
    }
    let (z, y, x) = u.dims();
    let mut out = Array4::<f64>::zeros((m.bands(), z, y, x));
    let planes: Vec<_> = out.axis_iter_mut(Axis(0)).collect();
    let fill = |(l, mut plane): (usize, ndarray::ArrayViewMut3<f64>)| {
        for (j, uj) in u.data().outer_iter().enumerate() {
            let w = m.get(l, j);
            plane.zip_mut_with(&uj, |o, &v| *o += w * v);
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        planes.into_par_iter().enumerate().for_each(fill);
    }
    #[cfg(not(feature = "parallel"))]
    planes.into_iter().enumerate().for_each(fill);
    SpectralImage::new(out, m.layout().cloned())
}

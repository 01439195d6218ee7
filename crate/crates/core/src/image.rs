//! Spectral images and concentration maps.
//!
//! Both are 4-D tensors in C order: `[band, z, y, x]` for [`SpectralImage`]
//! and `[channel, z, y, x]` for [`ConcentrationMap`]. 2-D images use `z = 1`.
//! Solvers work on pixel-major copies (`voxel * width + k`), see
//! [`to_pixel_major`] and [`from_pixel_major`].

use std::collections::BTreeMap;

use ndarray::{Array4, ArrayView3, Axis};

use crate::bands::BandLayout;
use crate::{Error, Result};

/// Free-form provenance (seeds, exposure, solver diagnostics).
pub type Meta = BTreeMap<String, serde_json::Value>;

fn validate(data: &Array4<f64>, what: &str) -> Result<()> {
    if data.shape().contains(&0) {
        return Err(Error::ShapeMismatch(format!("{what} has an empty axis: {:?}", data.shape())));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput(format!("{what} contains non-finite values")));
    }
    Ok(())
}

/// Measured intensities `S`, indexed `[band, z, y, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralImage {
    data: Array4<f64>,
    layout: Option<BandLayout>,
    pub meta: Meta,
}

impl SpectralImage {
    pub fn new(data: Array4<f64>, layout: Option<BandLayout>) -> Result<Self> {
        validate(&data, "spectral image")?;
        if let Some(l) = &layout {
            if l.len() != data.shape()[0] {
                return Err(Error::ShapeMismatch(format!(
                    "layout has {} bands, image has {}",
                    l.len(),
                    data.shape()[0]
                )));
            }
        }
        Ok(Self { data, layout, meta: Meta::new() })
    }

    pub fn data(&self) -> &Array4<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array4<f64> {
        self.data
    }

    pub fn layout(&self) -> Option<&BandLayout> {
        self.layout.as_ref()
    }

    pub fn bands(&self) -> usize {
        self.data.shape()[0]
    }

    /// Spatial dimensions `(z, y, x)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        spatial(&self.data)
    }

    pub fn voxels(&self) -> usize {
        let (z, y, x) = self.dims();
        z * y * x
    }

    pub fn band(&self, l: usize) -> ArrayView3<'_, f64> {
        self.data.index_axis(Axis(0), l)
    }

    pub fn with_meta(mut self, meta: Meta) -> Self {
        self.meta = meta;
        self
    }

    pub fn to_pixel_major(&self) -> Vec<f64> {
        to_pixel_major(&self.data)
    }
}

/// Fluorophore abundances `U`, indexed `[channel, z, y, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationMap {
    data: Array4<f64>,
    labels: Vec<String>,
    pub meta: Meta,
}

impl ConcentrationMap {
    pub fn new(data: Array4<f64>, labels: Vec<String>) -> Result<Self> {
        validate(&data, "concentration map")?;
        if labels.len() != data.shape()[0] {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} channels",
                labels.len(),
                data.shape()[0]
            )));
        }
        Ok(Self { data, labels, meta: Meta::new() })
    }

    /// Channels labelled `c0, c1, ...`.
    pub fn unlabeled(data: Array4<f64>) -> Result<Self> {
        let labels = (0..data.shape()[0]).map(|j| format!("c{j}")).collect();
        Self::new(data, labels)
    }

    pub fn data(&self) -> &Array4<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array4<f64> {
        self.data
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        spatial(&self.data)
    }

    pub fn voxels(&self) -> usize {
        let (z, y, x) = self.dims();
        z * y * x
    }

    pub fn channel(&self, j: usize) -> ArrayView3<'_, f64> {
        self.data.index_axis(Axis(0), j)
    }

    pub fn with_meta(mut self, meta: Meta) -> Self {
        self.meta = meta;
        self
    }

    pub fn to_pixel_major(&self) -> Vec<f64> {
        to_pixel_major(&self.data)
    }
}

fn spatial(data: &Array4<f64>) -> (usize, usize, usize) {
    let s = data.shape();
    (s[1], s[2], s[3])
}

/// Copies `[k, z, y, x]` into a voxel-major buffer `buf[voxel * K + k]`.
pub fn to_pixel_major(data: &Array4<f64>) -> Vec<f64> {
    let k = data.shape()[0];
    let p = data.len() / k;
    let mut out = vec![0.0; data.len()];
    for (c, plane) in data.outer_iter().enumerate() {
        for (v, &x) in plane.iter().enumerate() {
            out[v * k + c] = x;
        }
    }
    debug_assert_eq!(out.len(), p * k);
    out
}

/// Inverse of [`to_pixel_major`].
pub fn from_pixel_major(buf: &[f64], k: usize, dims: (usize, usize, usize)) -> Array4<f64> {
    let (z, y, x) = dims;
    let p = z * y * x;
    assert_eq!(buf.len(), p * k, "pixel-major buffer length");
    Array4::from_shape_fn((k, z, y, x), |(c, zi, yi, xi)| buf[((zi * y + yi) * x + xi) * k + c])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_major_round_trip() {
        let a = Array4::from_shape_fn((3, 2, 4, 5), |(c, z, y, x)| (c * 1000 + z * 100 + y * 10 + x) as f64);
        let pm = to_pixel_major(&a);
        assert_eq!(&pm[..3], &[0.0, 1000.0, 2000.0]);
        assert_eq!(from_pixel_major(&pm, 3, (2, 4, 5)), a);
    }

    #[test]
    fn constructors_validate() {
        let a = Array4::<f64>::zeros((2, 1, 4, 4));
        assert!(ConcentrationMap::new(a.clone(), vec!["a".into()]).is_err());
        assert!(SpectralImage::new(a.clone(), Some(BandLayout::uniform(400.0, 500.0, 3).unwrap())).is_err());
        let mut bad = a.clone();
        bad[[0, 0, 0, 0]] = f64::NAN;
        assert!(SpectralImage::new(bad, None).is_err());
        assert!(SpectralImage::new(Array4::zeros((0, 1, 2, 2)), None).is_err());
        assert_eq!(SpectralImage::new(a, None).unwrap().voxels(), 16);
    }
}

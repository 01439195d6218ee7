//! Spectral phasor transform and the HyU phasor histogram.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::image::SpectralImage;

/// Phasor coordinates of one voxel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Phasor {
    pub g: f64,
    pub s: f64,
    /// Set for voxels whose spectrum has zero l1 norm; `(g, s)` is `(0, 0)`.
    pub zero: bool,
}

/// Cosine and sine tables for `harmonic` over `bands` bands, with band `l`
/// (0-based) at phase `2 pi n (l + 1/2) / L`.
pub fn phase_tables(bands: usize, harmonic: usize) -> (Vec<f64>, Vec<f64>) {
    (0..bands)
        .map(|l| {
            let phase = 2.0 * PI * harmonic as f64 * (l as f64 + 0.5) / bands as f64;
            (phase.cos(), phase.sin())
        })
        .unzip()
}

/// Phasor of one spectrum, normalised by its l1 norm.
pub fn phasor_of(spectrum: &[f64], cos: &[f64], sin: &[f64]) -> Phasor {
    let norm: f64 = spectrum.iter().map(|v| v.abs()).sum();
    if norm == 0.0 {
        return Phasor { g: 0.0, s: 0.0, zero: true };
    }
    let mut g = 0.0;
    let mut s = 0.0;
    for ((&v, &c), &si) in spectrum.iter().zip(cos).zip(sin) {
        g += v * c;
        s += v * si;
    }
    Phasor { g: g / norm, s: s / norm, zero: false }
}

/// Per-voxel phasor coordinates, in `(z, y, x)` raster order.
pub fn phasor_transform(img: &SpectralImage, harmonic: usize) -> Vec<Phasor> {
    let l = img.bands();
    let (cos, sin) = phase_tables(l, harmonic);
    let pixels = img.to_pixel_major();
    let (_, out) = crate::exec::map_rows(&pixels, l, 1, || (), |_, _, x, _| phasor_of(x, &cos, &sin));
    out
}

/// Bin index of a phasor coordinate on `bins` equispaced cells over `[-1, 1]`.
pub fn bin_index(v: f64, bins: usize) -> usize {
    let i = ((v + 1.0) / 2.0 * bins as f64).floor();
    if i < 0.0 { 0 } else { (i as usize).min(bins - 1) }
}

/// One occupied histogram cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorCell {
    /// Member voxel indices, ascending.
    pub pixels: Vec<usize>,
    /// l1-normalised mean of the members' l1-normalised spectra.
    pub mean_spectrum: Vec<f64>,
}

/// Occupied cells of a `bins x bins` grid in `(g, s)`, keyed by
/// `(g_bin, s_bin)`. Zero-norm voxels are not assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorHistogram {
    pub bins: usize,
    pub harmonic: usize,
    pub cells: BTreeMap<(usize, usize), PhasorCell>,
}

impl PhasorHistogram {
    /// Builds the histogram. Cells are filled in voxel order, so the sums are
    /// independent of the thread count.
    pub fn build(pixels: &[f64], bands: usize, phasors: &[Phasor], bins: usize, harmonic: usize) -> Self {
        let mut cells: BTreeMap<(usize, usize), PhasorCell> = BTreeMap::new();
        for (p, ph) in phasors.iter().enumerate() {
            if ph.zero {
                continue;
            }
            let spectrum = &pixels[p * bands..(p + 1) * bands];
            let norm: f64 = spectrum.iter().map(|v| v.abs()).sum();
            let key = (bin_index(ph.g, bins), bin_index(ph.s, bins));
            let cell = cells
                .entry(key)
                .or_insert_with(|| PhasorCell { pixels: Vec::new(), mean_spectrum: vec![0.0; bands] });
            cell.pixels.push(p);
            for (acc, &v) in cell.mean_spectrum.iter_mut().zip(spectrum) {
                *acc += v / norm;
            }
        }
        for cell in cells.values_mut() {
            let n = cell.pixels.len() as f64;
            cell.mean_spectrum.iter_mut().for_each(|v| *v /= n);
            let norm: f64 = cell.mean_spectrum.iter().map(|v| v.abs()).sum();
            if norm > 0.0 {
                cell.mean_spectrum.iter_mut().for_each(|v| *v /= norm);
            }
        }
        Self { bins, harmonic, cells }
    }
}

//! HyU: phasor-binned linear unmixing.

use serde_json::json;

use crate::exec;
use crate::image::{from_pixel_major, ConcentrationMap, Meta, SpectralImage};
use crate::linalg::{matvec, pseudo_inverse, row_major};
use crate::mixing::MixingMatrix;
use crate::Result;

use super::phasor::{phasor_transform, PhasorHistogram};
use super::{check_bands, SolverConfig};

/// Bins voxels on the phasor plane, unmixes each bin's mean spectrum by LU
/// and writes the result back to every member, scaled by the voxel's l1
/// intensity. Zero-norm voxels are left at 0.
pub fn unmix_hyu(s: &SpectralImage, m: &MixingMatrix, cfg: &SolverConfig) -> Result<ConcentrationMap> {
    check_bands(s, m)?;
    cfg.validate()?;
    let (l, f) = (m.bands(), m.fluorophores());
    let pixels = s.to_pixel_major();
    let phasors = phasor_transform(s, cfg.hyu_harmonic);
    let hist = PhasorHistogram::build(&pixels, l, &phasors, cfg.hyu_bins, cfg.hyu_harmonic);

    let pinv = row_major(&pseudo_inverse(m.matrix()));
    let mut cell_of = vec![usize::MAX; phasors.len()];
    let mut abundances = Vec::with_capacity(hist.cells.len() * f);
    for (c, cell) in hist.cells.values().enumerate() {
        let mut u = vec![0.0; f];
        matvec(&pinv, l, &cell.mean_spectrum, &mut u);
        abundances.extend_from_slice(&u);
        for &p in &cell.pixels {
            cell_of[p] = c;
        }
    }

    let (out, _) = exec::map_rows(&pixels, l, f, || (), |_, p, x, o| {
        let c = cell_of[p];
        if c == usize::MAX {
            return;
        }
        let norm: f64 = x.iter().map(|v| v.abs()).sum();
        for (d, &u) in o.iter_mut().zip(&abundances[c * f..(c + 1) * f]) {
            *d = u * norm;
        }
    });
    let mut meta = Meta::new();
    meta.insert("hyu_occupied_bins".into(), json!(hist.cells.len()));
    meta.insert("zero_input_voxels".into(), json!(phasors.iter().filter(|p| p.zero).count()));
    Ok(ConcentrationMap::new(from_pixel_major(&out, f, s.dims()), m.labels().to_vec())?.with_meta(meta))
}

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array4;
use rand::Rng;
use specmix_core::rng::{substream, StreamRng};
use specmix_core::{ConcentrationMap, MixingMatrix, SpectralImage};

pub fn rng(seed: u64) -> StreamRng {
    substream(seed, 0)
}

/// Smallest and largest singular value via the eigenvalues of `M^T M`.
pub fn sigma_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.transpose() * m);
    let mut ev: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    ev.sort_by(f64::total_cmp);
    (ev[0], *ev.last().unwrap())
}

/// Random non-negative `L x F` matrix with unit column sums and
/// `kappa < max_kappa` (rejection sampling).
pub fn random_mixing(rng: &mut StreamRng, l: usize, f: usize, max_kappa: f64) -> MixingMatrix {
    loop {
        let m = DMatrix::from_fn(l, f, |_, _| rng.random::<f64>());
        let mm = MixingMatrix::normalized(m, (0..f).map(|j| format!("c{j}")).collect(), None).unwrap();
        let (lo, hi) = sigma_extremes(mm.matrix());
        if lo > 0.0 && hi / lo < max_kappa {
            return mm;
        }
    }
}

pub fn random_map(rng: &mut StreamRng, f: usize, dims: (usize, usize, usize), scale: f64) -> ConcentrationMap {
    let data = Array4::from_shape_simple_fn((f, dims.0, dims.1, dims.2), || rng.random::<f64>() * scale);
    ConcentrationMap::unlabeled(data).unwrap()
}

pub fn image_from_pixels(pixels: &[Vec<f64>], dims: (usize, usize, usize)) -> SpectralImage {
    let l = pixels[0].len();
    let voxels = dims.0 * dims.1 * dims.2;
    let data = Array4::from_shape_fn((l, dims.0, dims.1, dims.2), |(b, z, y, x)| {
        pixels[(z * dims.1 + y) * dims.2 + x][b]
    });
    assert_eq!(pixels.len(), voxels);
    SpectralImage::new(data, None).unwrap()
}

/// Pixel `p` of a `K x Z x Y x X` array as a vector.
pub fn pixel(data: &Array4<f64>, p: usize) -> Vec<f64> {
    let (_, _, y, x) = data.dim();
    let (zi, yi, xi) = (p / (y * x), (p / x) % y, p % x);
    (0..data.dim().0).map(|k| data[[k, zi, yi, xi]]).collect()
}

/// Least-squares solution through the normal equations (full column rank).
pub fn normal_equations(m: &DMatrix<f64>, s: &[f64]) -> Vec<f64> {
    let g = m.transpose() * m;
    let b = m.transpose() * nalgebra::DVector::from_column_slice(s);
    g.lu().solve(&b).expect("full column rank").iter().copied().collect()
}

pub fn objective(m: &DMatrix<f64>, s: &[f64], u: &[f64]) -> f64 {
    let r = m * nalgebra::DVector::from_column_slice(u) - nalgebra::DVector::from_column_slice(s);
    r.norm_squared()
}

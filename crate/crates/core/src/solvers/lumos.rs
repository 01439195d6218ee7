//! LUMoS: k-means clustering of l1-normalised pixel spectra with hard
//! assignment of each pixel's intensity to one channel.

use rand::Rng;
use serde_json::json;

use crate::exec;
use crate::image::{from_pixel_major, ConcentrationMap, Meta, SpectralImage};
use crate::mixing::MixingMatrix;
use crate::rng::substream;
use crate::{Error, Result};

use super::{check_bands, SolverConfig};

/// Result of one k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// `k x L`, row-major.
    pub centroids: Vec<f64>,
    pub assignment: Vec<usize>,
    pub wcss: f64,
    pub iterations: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Index of the nearest centroid, ties to the lower index.
fn nearest(x: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.chunks(dim).enumerate() {
        let d = dist2(x, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn count_distinct(points: &[f64], dim: usize) -> usize {
    let mut keys: Vec<Vec<u64>> = points.chunks(dim).map(|p| p.iter().map(|v| v.to_bits()).collect()).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn kmeans_pp(points: &[f64], dim: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let n = points.len() / dim;
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(&points[first * dim..(first + 1) * dim]);
    let mut d2: Vec<f64> = points.chunks(dim).map(|p| dist2(p, &centroids[..dim])).collect();
    while centroids.len() < k * dim {
        let total: f64 = d2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            acc += d;
            if acc > target && d > 0.0 {
                pick = i;
                break;
            }
        }
        let c = &points[pick * dim..(pick + 1) * dim];
        for (d, p) in d2.iter_mut().zip(points.chunks(dim)) {
            *d = d.min(dist2(p, c));
        }
        centroids.extend_from_slice(c);
    }
    centroids
}

/// Lloyd iterations from a k-means++ start drawn from `seed`.
pub fn kmeans(points: &[f64], dim: usize, k: usize, max_iter: usize, seed: u64) -> Clustering {
    let n = points.len() / dim;
    let mut rng = substream(seed, 0);
    let mut centroids = kmeans_pp(points, dim, k, &mut rng);
    let mut assignment = vec![usize::MAX; n];
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let next = exec::map_indices(n, |i| nearest(&points[i * dim..(i + 1) * dim], &centroids, dim).0);
        let changed = next != assignment;
        assignment = next;
        if !changed {
            break;
        }
        let (sums, counts) = exec::reduce_chunks(
            n,
            (vec![0.0; k * dim], vec![0usize; k]),
            |start, end| {
                let mut sums = vec![0.0; k * dim];
                let mut counts = vec![0usize; k];
                for i in start..end {
                    let c = assignment[i];
                    counts[c] += 1;
                    for (s, &x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(&points[i * dim..(i + 1) * dim]) {
                        *s += x;
                    }
                }
                (sums, counts)
            },
            |(mut a, mut b), (c, d)| {
                a.iter_mut().zip(&c).for_each(|(x, y)| *x += y);
                b.iter_mut().zip(&d).for_each(|(x, y)| *x += y);
                (a, b)
            },
        );
        for c in 0..k {
            // empty clusters keep their centroid
            if counts[c] > 0 {
                for d in 0..dim {
                    centroids[c * dim + d] = sums[c * dim + d] / counts[c] as f64;
                }
            }
        }
    }
    let wcss = exec::reduce_chunks(
        n,
        0.0,
        |start, end| {
            (start..end)
                .map(|i| dist2(&points[i * dim..(i + 1) * dim], &centroids[assignment[i] * dim..(assignment[i] + 1) * dim]))
                .sum()
        },
        |a, b| a + b,
    );
    Clustering { centroids, assignment, wcss, iterations }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 { 0.0 } else { dot / (na * nb) }
}

/// Greedy cluster-to-channel matching by cosine similarity between centroids
/// and mixing-matrix columns. Each step takes the best remaining pair; ties
/// go to the lower channel, then the lower cluster. Returns the channel of
/// every cluster (`None` when clusters outnumber channels).
pub fn match_clusters(centroids: &[f64], dim: usize, m: &MixingMatrix) -> Vec<Option<usize>> {
    let k = centroids.len() / dim;
    let f = m.fluorophores();
    let columns: Vec<Vec<f64>> = (0..f).map(|j| m.column(j)).collect();
    let mut out = vec![None; k];
    let mut used = vec![false; f];
    for _ in 0..k.min(f) {
        let mut best: Option<(f64, usize, usize)> = None;
        for (j, col) in columns.iter().enumerate() {
            if used[j] {
                continue;
            }
            for c in (0..k).filter(|&c| out[c].is_none()) {
                let sim = cosine(&centroids[c * dim..(c + 1) * dim], col);
                if best.is_none_or(|(b, _, _)| sim > b) {
                    best = Some((sim, j, c));
                }
            }
        }
        let (_, j, c) = best.expect("unmatched pair exists");
        out[c] = Some(j);
        used[j] = true;
    }
    out
}

/// Clusters the l1-normalised spectra of the non-zero voxels into `k`
/// groups, keeping the restart with the lowest within-cluster sum of squares,
/// and writes each voxel's l1 intensity into the channel matched to its
/// cluster.
pub fn unmix_lumos(s: &SpectralImage, m: &MixingMatrix, k: usize, cfg: &SolverConfig) -> Result<ConcentrationMap> {
    check_bands(s, m)?;
    cfg.validate()?;
    if k == 0 {
        return Err(Error::InvalidConfig("cluster count must be at least 1".into()));
    }
    let (l, f) = (s.bands(), m.fluorophores());
    let pixels = s.to_pixel_major();
    let mut members = Vec::new();
    let mut intensity = Vec::new();
    let mut points = Vec::new();
    for (p, x) in pixels.chunks(l).enumerate() {
        let norm: f64 = x.iter().map(|v| v.abs()).sum();
        if norm > 0.0 {
            members.push(p);
            intensity.push(norm);
            points.extend(x.iter().map(|v| v / norm));
        }
    }
    let distinct = count_distinct(&points, l);
    if distinct < k {
        return Err(Error::DegenerateClustering { k, distinct });
    }
    let mut best: Option<(usize, Clustering)> = None;
    for r in 0..cfg.lumos_restarts {
        let run = kmeans(&points, l, k, cfg.lumos_max_iter, cfg.rng_seed.wrapping_add(r as u64));
        if best.as_ref().is_none_or(|(_, b)| run.wcss < b.wcss) {
            best = Some((r, run));
        }
    }
    let (restart, best) = best.expect("at least one restart");
    let channel = match_clusters(&best.centroids, l, m);

    let mut out = vec![0.0; s.voxels() * f];
    for ((&p, &c), &w) in members.iter().zip(&best.assignment).zip(&intensity) {
        if let Some(j) = channel[c] {
            out[p * f + j] = w;
        }
    }
    let mut meta = Meta::new();
    meta.insert("lumos_wcss".into(), json!(best.wcss));
    meta.insert("lumos_restart".into(), json!(restart));
    meta.insert("lumos_iterations".into(), json!(best.iterations));
    meta.insert("lumos_cluster_channels".into(), json!(channel));
    Ok(ConcentrationMap::new(from_pixel_major(&out, f, s.dims()), m.labels().to_vec())?.with_meta(meta))
}

use std::path::Path;

use ndarray::Array4;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::exec;
use crate::image::ConcentrationMap;
use crate::rng::{substream, StreamRng};
use crate::{Error, Result};

/// Voxels per unit of `density`.
const DENSITY_VOXELS: f64 = 10_000.0;
/// Profiles are truncated at this many standard deviations.
const TRUNCATE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhantomKind {
    Blobs,
    Filaments,
    Rings,
    /// Channel `j` uses blobs, filaments, rings in turn.
    Mixed,
}

/// Structured ground-truth concentration fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    /// `[Z, Y, X]`.
    pub dims: [usize; 3],
    pub fluorophores: usize,
    /// Objects per channel per 10 000 voxels.
    #[serde(default = "default_density")]
    pub density: f64,
    /// Characteristic object size in voxels (blob sigma, ring radius scale).
    #[serde(default = "default_size")]
    pub size: f64,
    /// Peak concentration; object amplitudes are drawn from `[0.5, 1] * amplitude`.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Fraction of channel `j`'s objects that reuse the geometry of channel
    /// `j - 1`.
    #[serde(default)]
    pub colocalization: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_density() -> f64 {
    8.0
}

fn default_size() -> f64 {
    3.0
}

fn default_amplitude() -> f64 {
    1.0
}

impl PhantomSpec {
    pub fn new(kind: PhantomKind, dims: [usize; 3], fluorophores: usize) -> Self {
        Self {
            kind,
            dims,
            fluorophores,
            density: default_density(),
            size: default_size(),
            amplitude: default_amplitude(),
            colocalization: 0.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        let [z, y, x] = self.dims;
        if z == 0 || y < 8 || x < 8 {
            return bad(format!("dims {:?}: Y and X must be at least 8 and Z at least 1", self.dims));
        }
        if self.fluorophores == 0 {
            return bad("at least one fluorophore is required".into());
        }
        if !(self.density.is_finite() && self.density >= 0.0) {
            return bad(format!("density must be non-negative, got {}", self.density));
        }
        if !(self.size.is_finite() && self.size > 0.0) {
            return bad(format!("size must be positive, got {}", self.size));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return bad(format!("amplitude must be positive, got {}", self.amplitude));
        }
        if !(0.0..=1.0).contains(&self.colocalization) {
            return bad(format!("colocalization must lie in [0, 1], got {}", self.colocalization));
        }
        Ok(())
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: Self = serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    fn kind_of(&self, channel: usize) -> PhantomKind {
        match self.kind {
            PhantomKind::Mixed => [PhantomKind::Blobs, PhantomKind::Filaments, PhantomKind::Rings][channel % 3],
            k => k,
        }
    }

    fn objects_per_channel(&self) -> usize {
        let [z, y, x] = self.dims;
        (self.density * (z * y * x) as f64 / DENSITY_VOXELS).round() as usize
    }
}

type Point = [f64; 3];

#[derive(Debug, Clone)]
enum Shape {
    Blob { center: Point, sigma: f64 },
    Filament { path: Vec<Point>, sigma: f64 },
    Ring { center: Point, radius: f64, width: f64 },
}

fn random_point(dims: [usize; 3], rng: &mut StreamRng) -> Point {
    let mut p = [0.0; 3];
    for (c, &d) in p.iter_mut().zip(&dims) {
        *c = if d > 1 { rng.random::<f64>() * (d - 1) as f64 } else { 0.0 };
    }
    p
}

fn random_shape(kind: PhantomKind, spec: &PhantomSpec, rng: &mut StreamRng) -> Shape {
    let dims = spec.dims;
    let thin = (spec.size / 3.0).max(0.7);
    match kind {
        PhantomKind::Blobs | PhantomKind::Mixed => Shape::Blob { center: random_point(dims, rng), sigma: spec.size },
        PhantomKind::Rings => {
            let radius = (1.5 + 1.5 * rng.random::<f64>()) * spec.size;
            Shape::Ring { center: random_point(dims, rng), radius, width: thin }
        }
        PhantomKind::Filaments => {
            let turn = Normal::new(0.0, 0.2).expect("valid sigma");
            let steps = (0.5 * *dims.iter().max().expect("3 dims") as f64).round().max(1.0) as usize;
            let mut p = random_point(dims, rng);
            let mut azimuth = rng.random::<f64>() * std::f64::consts::TAU;
            let volumetric = dims[0] > 1;
            let mut elevation = if volumetric { (rng.random::<f64>() - 0.5) * std::f64::consts::PI } else { 0.0 };
            let mut path = vec![p];
            for _ in 0..steps {
                azimuth += turn.sample(rng);
                if volumetric {
                    elevation += turn.sample(rng);
                }
                p = [
                    p[0] + elevation.sin(),
                    p[1] + elevation.cos() * azimuth.sin(),
                    p[2] + elevation.cos() * azimuth.cos(),
                ];
                path.push(p);
            }
            Shape::Filament { path, sigma: thin }
        }
    }
}

fn dist2_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let len2 = ab.iter().map(|v| v * v).sum::<f64>();
    let t = if len2 > 0.0 { (ap.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / len2).clamp(0.0, 1.0) } else { 0.0 };
    (0..3).map(|i| (ap[i] - t * ab[i]).powi(2)).sum()
}

impl Shape {
    /// Inclusive-exclusive voxel bounds of the truncated profile.
    fn bounds(&self, dims: [usize; 3]) -> [(usize, usize); 3] {
        let (lo, hi, reach) = match self {
            Shape::Blob { center, sigma } => (*center, *center, TRUNCATE * sigma),
            Shape::Ring { center, radius, width } => (*center, *center, radius + TRUNCATE * width),
            Shape::Filament { path, sigma } => {
                let mut lo = [f64::INFINITY; 3];
                let mut hi = [f64::NEG_INFINITY; 3];
                for p in path {
                    for i in 0..3 {
                        lo[i] = lo[i].min(p[i]);
                        hi[i] = hi[i].max(p[i]);
                    }
                }
                (lo, hi, TRUNCATE * sigma)
            }
        };
        let mut out = [(0, 0); 3];
        for i in 0..3 {
            let a = (lo[i] - reach).ceil().max(0.0);
            let b = (hi[i] + reach).floor() + 1.0;
            out[i] = (a.min(dims[i] as f64) as usize, b.clamp(0.0, dims[i] as f64) as usize);
        }
        out
    }

    fn profile(&self, p: Point) -> f64 {
        let d2 = |c: &Point| (0..3).map(|i| (p[i] - c[i]).powi(2)).sum::<f64>();
        match self {
            Shape::Blob { center, sigma } => {
                let r2 = d2(center);
                if r2 > (TRUNCATE * sigma).powi(2) { 0.0 } else { (-r2 / (2.0 * sigma * sigma)).exp() }
            }
            Shape::Ring { center, radius, width } => {
                let off = d2(center).sqrt() - radius;
                if off.abs() > TRUNCATE * width { 0.0 } else { (-off * off / (2.0 * width * width)).exp() }
            }
            Shape::Filament { path, sigma } => {
                let r2 = path.windows(2).map(|w| dist2_to_segment(p, w[0], w[1])).fold(f64::INFINITY, f64::min);
                if r2 > (TRUNCATE * sigma).powi(2) { 0.0 } else { (-r2 / (2.0 * sigma * sigma)).exp() }
            }
        }
    }
}

/// Generates an `F`-channel phantom. Objects are Gaussian blobs, Gaussian
/// tubes along random walks, or annuli (spherical shells in 3D), combined by
/// voxel-wise maximum. Channel `j` draws from substream `j` of the seed.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<ConcentrationMap> {
    spec.validate()?;
    let n = spec.objects_per_channel();
    let shared = (spec.colocalization * n as f64).round() as usize;
    let mut channels: Vec<Vec<(Shape, f64)>> = Vec::with_capacity(spec.fluorophores);
    for j in 0..spec.fluorophores {
        let mut rng = substream(spec.rng_seed, j as u64);
        let kind = spec.kind_of(j);
        let mut objects = Vec::with_capacity(n);
        for i in 0..n {
            let shape = match channels.last() {
                Some(prev) if i < shared => prev[i].0.clone(),
                _ => random_shape(kind, spec, &mut rng),
            };
            let amp = (0.5 + 0.5 * rng.random::<f64>()) * spec.amplitude;
            objects.push((shape, amp));
        }
        channels.push(objects);
    }

    let [z, y, x] = spec.dims;
    let planes = exec::map_indices(spec.fluorophores, |j| {
        let mut plane = vec![0.0f64; z * y * x];
        for (shape, amp) in &channels[j] {
            let [(z0, z1), (y0, y1), (x0, x1)] = shape.bounds(spec.dims);
            for zi in z0..z1 {
                for yi in y0..y1 {
                    for xi in x0..x1 {
                        let v = amp * shape.profile([zi as f64, yi as f64, xi as f64]);
                        let cell = &mut plane[(zi * y + yi) * x + xi];
                        *cell = cell.max(v);
                    }
                }
            }
        }
        plane
    });
    let data = Array4::from_shape_vec((spec.fluorophores, z, y, x), planes.concat()).expect("sized planes");
    ConcentrationMap::unlabeled(data)
}

//! Seeded synthetic mask fixtures.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MaskVolume, VolumeError};
use crate::rng;

const AXES: [char; 3] = ['x', 'y', 'z'];
const BLOB_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("{shape} does not fit: {axis} {bound}")]
    OutOfBounds { shape: &'static str, axis: char, bound: String },
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("could not place blob {placed} of {count} after {attempts} attempts (separation or bounds too tight)")]
    PlacementFailed { placed: usize, count: usize, attempts: usize },
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

/// Geometric recipe for a synthetic mask. Voxel `(x, y, z)` has its centre at
/// integer coordinates `(x, y, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Sphere { center: [f64; 3], radius: f64 },
    /// Integer box covering `edges[a]` voxels from `corner[a]` on each axis.
    Cuboid { corner: [usize; 3], edges: [usize; 3] },
    Ellipsoid { center: [f64; 3], semi_axes: [f64; 3] },
    /// Union of `count` integer-centred balls, pairwise non-adjacent under
    /// 26-connectivity with at least `min_separation` voxels between them.
    BlobSet { count: usize, radius_min: f64, radius_max: f64, min_separation: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dims: [usize; 3],
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(dims: [usize; 3], shape: Shape) -> Self {
        Self { dims, shape, seed: 0 }
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

fn check_extent(shape: &'static str, dims: [usize; 3], lo: [f64; 3], hi: [f64; 3]) -> Result<(), SynthError> {
    for a in 0..3 {
        if lo[a] < 0.0 {
            return Err(SynthError::OutOfBounds {
                shape,
                axis: AXES[a],
                bound: format!("extends to {} below 0", lo[a]),
            });
        }
        let max = (dims[a] - 1) as f64;
        if hi[a] > max {
            return Err(SynthError::OutOfBounds {
                shape,
                axis: AXES[a],
                bound: format!("extends to {} beyond {}", hi[a], max),
            });
        }
    }
    Ok(())
}

fn non_negative(field: &'static str, v: f64) -> Result<(), SynthError> {
    if !v.is_finite() || v < 0.0 {
        return Err(SynthError::InvalidParameter { field, reason: format!("{v} must be finite and >= 0") });
    }
    Ok(())
}

fn ball(dims: [usize; 3], c: [f64; 3], r: f64) -> Result<MaskVolume, VolumeError> {
    let r2 = r * r;
    MaskVolume::from_fn(dims, |x, y, z| {
        let d = [x as f64 - c[0], y as f64 - c[1], z as f64 - c[2]];
        d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= r2
    })
}

/// Generate the mask described by `spec`. Pure in `spec`: equal specs give
/// bit-identical masks.
pub fn synth(spec: &SyntheticSpec) -> Result<MaskVolume, SynthError> {
    let dims = spec.dims;
    MaskVolume::empty(dims)?;
    match spec.shape {
        Shape::Sphere { center, radius } => {
            non_negative("radius", radius)?;
            check_extent("sphere", dims, center.map(|c| c - radius), center.map(|c| c + radius))?;
            Ok(ball(dims, center, radius)?)
        }
        Shape::Cuboid { corner, edges } => {
            if let Some(a) = edges.iter().position(|&e| e == 0) {
                return Err(SynthError::InvalidParameter {
                    field: "edges",
                    reason: format!("{} edge must be >= 1", AXES[a]),
                });
            }
            let lo = corner.map(|c| c as f64);
            let hi = [0, 1, 2].map(|a| (corner[a] + edges[a] - 1) as f64);
            check_extent("cuboid", dims, lo, hi)?;
            Ok(MaskVolume::from_fn(dims, |x, y, z| {
                let p = [x, y, z];
                (0..3).all(|a| p[a] >= corner[a] && p[a] < corner[a] + edges[a])
            })?)
        }
        Shape::Ellipsoid { center, semi_axes } => {
            if let Some(a) = semi_axes.iter().position(|&s| !(s.is_finite() && s > 0.0)) {
                return Err(SynthError::InvalidParameter {
                    field: "semi_axes",
                    reason: format!("{} semi-axis {} must be > 0", AXES[a], semi_axes[a]),
                });
            }
            let lo = [0, 1, 2].map(|a| center[a] - semi_axes[a]);
            let hi = [0, 1, 2].map(|a| center[a] + semi_axes[a]);
            check_extent("ellipsoid", dims, lo, hi)?;
            Ok(MaskVolume::from_fn(dims, |x, y, z| {
                let p = [x as f64, y as f64, z as f64];
                (0..3).map(|a| ((p[a] - center[a]) / semi_axes[a]).powi(2)).sum::<f64>() <= 1.0
            })?)
        }
        Shape::BlobSet { count, radius_min, radius_max, min_separation } => {
            non_negative("radius_min", radius_min)?;
            non_negative("min_separation", min_separation)?;
            if !(radius_max.is_finite() && radius_max >= radius_min) {
                return Err(SynthError::InvalidParameter {
                    field: "radius_max",
                    reason: format!("{radius_max} must be >= radius_min {radius_min}"),
                });
            }
            let span = 2.0 * radius_max.ceil();
            if let Some(a) = dims.iter().position(|&d| ((d - 1) as f64) < span) {
                return Err(SynthError::OutOfBounds {
                    shape: "blob_set",
                    axis: AXES[a],
                    bound: format!("extent {} cannot hold a blob of radius {}", dims[a], radius_max),
                });
            }
            let blobs = place_blobs(dims, count, radius_min, radius_max, min_separation, spec.seed)?;
            Ok(MaskVolume::from_fn(dims, |x, y, z| {
                blobs.iter().any(|(c, r)| {
                    let d = [x as f64 - c[0], y as f64 - c[1], z as f64 - c[2]];
                    d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= r * r
                })
            })?)
        }
    }
}

/// Rejection-sample integer centres. Two balls whose centres are further
/// apart than `r1 + r2 + sqrt(3)` cannot contain 26-adjacent voxels.
fn place_blobs(
    dims: [usize; 3],
    count: usize,
    rmin: f64,
    rmax: f64,
    sep: f64,
    seed: u64,
) -> Result<Vec<([f64; 3], f64)>, SynthError> {
    let mut s = rng::stream(seed, &[rng::tag("blob_set")]);
    let mut placed: Vec<([f64; 3], f64)> = Vec::with_capacity(count);
    let mut attempts = 0;
    while placed.len() < count {
        if attempts == BLOB_ATTEMPTS * count.max(1) {
            return Err(SynthError::PlacementFailed { placed: placed.len(), count, attempts });
        }
        attempts += 1;
        let r = if rmax > rmin { s.random_range(rmin..=rmax) } else { rmin };
        let m = r.ceil() as usize;
        let c = [0, 1, 2].map(|a| s.random_range(m..=dims[a] - 1 - m) as f64);
        let clear = placed.iter().all(|(p, q)| {
            let d = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2)).sqrt();
            d > r + q + 3f64.sqrt() + sep
        });
        if clear {
            placed.push((c, r));
        }
    }
    Ok(placed)
}

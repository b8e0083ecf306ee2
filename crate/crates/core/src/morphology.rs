//! Binary voxel-grid geometry: overlap scores, boundary statistics,
//! ball-element morphology (deterministic and randomized), connected
//! components and bounding boxes.
//!
//! Out-of-grid voxels are background everywhere in this module.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volumes::MaskVolume;

#[derive(Debug, Error, PartialEq)]
pub enum MorphologyError {
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch([usize; 3], [usize; 3]),
    #[error("mask is empty; surface/volume ratio is undefined")]
    EmptyMask,
    #[error("structuring element radius must be >= 1, got {0}")]
    BadRadius(usize),
    #[error("probability must lie in [0, 1], got {0}")]
    BadProbability(f64),
}

/// Discrete Euclidean ball: every integer offset with `|d| <= radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuringElement {
    radius: usize,
    offsets: Vec<[i64; 3]>,
}

impl StructuringElement {
    pub fn ball(radius: usize) -> Result<Self, MorphologyError> {
        if radius == 0 {
            return Err(MorphologyError::BadRadius(radius));
        }
        let r = radius as i64;
        let mut offsets = Vec::new();
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx * dx + dy * dy + dz * dz <= r * r {
                        offsets.push([dx, dy, dz]);
                    }
                }
            }
        }
        Ok(Self { radius, offsets })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn offsets(&self) -> &[[i64; 3]] {
        &self.offsets
    }
}

/// Overlap decomposition of a prediction against a ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DscBreakdown {
    pub intersection: usize,
    /// Prediction-only voxels (additional volume).
    pub delta_v1: usize,
    /// Truth-only voxels (missing volume).
    pub delta_v2: usize,
    pub v_truth: usize,
    pub dsc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceVolumeStats {
    /// Inner-boundary voxel count (foreground with a background 6-neighbour).
    pub surface: usize,
    pub volume: usize,
    pub ratio_c: f64,
}

/// Axis-aligned box, inclusive-exclusive on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl BoundingBox {
    pub fn new(min: [usize; 3], max: [usize; 3]) -> Self {
        debug_assert!((0..3).all(|a| min[a] <= max[a]));
        Self { min, max }
    }

    pub fn extents(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.max[a] - self.min[a])
    }

    pub fn voxel_count(&self) -> usize {
        self.extents().iter().product()
    }

    pub fn contains_point(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] < self.max[a])
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        (0..3).all(|a| other.min[a] >= self.min[a] && other.max[a] <= self.max[a])
    }

    /// `[x0, y0, z0, x1, y1, z1]`.
    pub fn to_array(&self) -> [usize; 6] {
        [self.min[0], self.min[1], self.min[2], self.max[0], self.max[1], self.max[2]]
    }

    pub fn from_array(a: [usize; 6]) -> Self {
        Self::new([a[0], a[1], a[2]], [a[3], a[4], a[5]])
    }
}

impl Serialize for BoundingBox {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let a = <[usize; 6]>::deserialize(d)?;
        if (0..3).any(|i| a[i] > a[i + 3]) {
            return Err(serde::de::Error::custom(format!("box {a:?} has min > max")));
        }
        Ok(Self::from_array(a))
    }
}

fn same_dims(a: &MaskVolume, b: &MaskVolume) -> Result<(), MorphologyError> {
    if a.dims() != b.dims() {
        return Err(MorphologyError::DimensionMismatch(a.dims(), b.dims()));
    }
    Ok(())
}

/// DSC of `prediction` against `truth`. Two empty masks score 1.
pub fn dsc(truth: &MaskVolume, prediction: &MaskVolume) -> Result<DscBreakdown, MorphologyError> {
    same_dims(truth, prediction)?;
    let (mut both, mut pred_only, mut truth_only) = (0usize, 0usize, 0usize);
    for (&t, &p) in truth.voxels().iter().zip(prediction.voxels()) {
        match (t, p) {
            (1, 1) => both += 1,
            (0, 1) => pred_only += 1,
            (1, 0) => truth_only += 1,
            _ => {}
        }
    }
    let denom = 2 * both + pred_only + truth_only;
    let dsc = if denom == 0 { 1.0 } else { 2.0 * both as f64 / denom as f64 };
    Ok(DscBreakdown { intersection: both, delta_v1: pred_only, delta_v2: truth_only, v_truth: both + truth_only, dsc })
}

const FACE_NEIGHBOURS: [[i64; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

fn is_boundary(mask: &MaskVolume, [x, y, z]: [usize; 3]) -> bool {
    let (x, y, z) = (x as i64, y as i64, z as i64);
    FACE_NEIGHBOURS.iter().any(|d| !mask.get_signed(x + d[0], y + d[1], z + d[2]))
}

/// Surface (inner-boundary count), volume and their ratio C = S/V.
pub fn surface_volume_stats(mask: &MaskVolume) -> Result<SurfaceVolumeStats, MorphologyError> {
    let mut surface = 0;
    let mut volume = 0;
    for i in mask.foreground_indices() {
        volume += 1;
        if is_boundary(mask, mask.coords(i)) {
            surface += 1;
        }
    }
    if volume == 0 {
        return Err(MorphologyError::EmptyMask);
    }
    Ok(SurfaceVolumeStats { surface, volume, ratio_c: surface as f64 / volume as f64 })
}

/// Combine `dst[p]` with `src[p + d]` row by row. Positions whose shifted
/// source falls outside the grid receive `outside`.
fn shift_combine(dims: [usize; 3], src: &[u8], dst: &mut [u8], d: [i64; 3], op: fn(u8, u8) -> u8, outside: u8) {
    let [nx, ny, nz] = dims;
    let (ni, nj, nk) = (nx as i64, ny as i64, nz as i64);
    // Destination x-range with an in-grid source.
    let x_lo = (-d[0]).clamp(0, ni) as usize;
    let x_hi = (ni - d[0]).clamp(0, ni) as usize;
    for z in 0..nz {
        let sz = z as i64 + d[2];
        for y in 0..ny {
            let sy = y as i64 + d[1];
            let row = nx * (y + ny * z);
            let out = &mut dst[row..row + nx];
            if sz < 0 || sz >= nk || sy < 0 || sy >= nj || x_lo >= x_hi {
                out.iter_mut().for_each(|v| *v = op(*v, outside));
                continue;
            }
            let srow = nx * (sy as usize + ny * sz as usize);
            let sx_lo = (x_lo as i64 + d[0]) as usize;
            let sx_hi = (x_hi as i64 + d[0]) as usize;
            for (o, &s) in out[x_lo..x_hi].iter_mut().zip(&src[srow + sx_lo..srow + sx_hi]) {
                *o = op(*o, s);
            }
            out[..x_lo].iter_mut().for_each(|v| *v = op(*v, outside));
            out[x_hi..].iter_mut().for_each(|v| *v = op(*v, outside));
        }
    }
}

pub fn dilate(mask: &MaskVolume, se: &StructuringElement) -> MaskVolume {
    let mut out = mask.voxels().to_vec();
    for &d in se.offsets() {
        if d != [0, 0, 0] {
            shift_combine(mask.dims(), mask.voxels(), &mut out, d, |a, b| a | b, 0);
        }
    }
    mask.with_buffer(out)
}

pub fn erode(mask: &MaskVolume, se: &StructuringElement) -> MaskVolume {
    let mut out = mask.voxels().to_vec();
    for &d in se.offsets() {
        if d != [0, 0, 0] {
            shift_combine(mask.dims(), mask.voxels(), &mut out, d, |a, b| a & b, 0);
        }
    }
    mask.with_buffer(out)
}

/// `dilate(mask, r)` minus `mask`.
pub fn outer_shell(mask: &MaskVolume, r: usize) -> Result<MaskVolume, MorphologyError> {
    let grown = dilate(mask, &StructuringElement::ball(r)?);
    let shell = grown.voxels().iter().zip(mask.voxels()).map(|(&g, &m)| g & !m & 1).collect();
    Ok(mask.with_buffer(shell))
}

/// `mask` minus `erode(mask, r)`.
pub fn inner_shell(mask: &MaskVolume, r: usize) -> Result<MaskVolume, MorphologyError> {
    let shrunk = erode(mask, &StructuringElement::ball(r)?);
    let shell = mask.voxels().iter().zip(shrunk.voxels()).map(|(&m, &s)| m & !s & 1).collect();
    Ok(mask.with_buffer(shell))
}

fn check_probability(mu: f64) -> Result<(), MorphologyError> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(MorphologyError::BadProbability(mu));
    }
    Ok(())
}

/// Flip every candidate voxel to `value` independently with probability
/// `mu`, visiting candidates in storage order and drawing exactly one
/// uniform per candidate.
fn flip_candidates(mask: &MaskVolume, candidates: &MaskVolume, mu: f64, value: u8, rng: &mut impl Rng) -> MaskVolume {
    let mut out = mask.voxels().to_vec();
    for (o, &c) in out.iter_mut().zip(candidates.voxels()) {
        if c != 0 && rng.random::<f64>() < mu {
            *o = value;
        }
    }
    mask.with_buffer(out)
}

/// Add each voxel of `outer_shell(mask, r)` with probability `mu1`.
pub fn random_dilate(mask: &MaskVolume, r: usize, mu1: f64, rng: &mut impl Rng) -> Result<MaskVolume, MorphologyError> {
    check_probability(mu1)?;
    let shell = outer_shell(mask, r)?;
    Ok(flip_candidates(mask, &shell, mu1, 1, rng))
}

/// Remove each voxel of `inner_shell(mask, r)` with probability `mu2`.
pub fn random_erode(mask: &MaskVolume, r: usize, mu2: f64, rng: &mut impl Rng) -> Result<MaskVolume, MorphologyError> {
    check_probability(mu2)?;
    let shell = inner_shell(mask, r)?;
    Ok(flip_candidates(mask, &shell, mu2, 0, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Six,
    Eighteen,
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            6 => Some(Self::Six),
            18 => Some(Self::Eighteen),
            26 => Some(Self::TwentySix),
            _ => None,
        }
    }

    fn offsets(self) -> Vec<[i64; 3]> {
        let max_nonzero = match self {
            Self::Six => 1,
            Self::Eighteen => 2,
            Self::TwentySix => 3,
        };
        let mut v = Vec::new();
        for dz in -1..=1i64 {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let nz = [dx, dy, dz].iter().filter(|&&c| c != 0).count();
                    if nz > 0 && nz <= max_nonzero {
                        v.push([dx, dy, dz]);
                    }
                }
            }
        }
        v
    }
}

/// Label volume from [`connected_components`]; 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub dims: [usize; 3],
    pub labels: Vec<u32>,
    pub count: usize,
    /// `sizes[k - 1]` is the voxel count of label `k`.
    pub sizes: Vec<usize>,
}

impl Components {
    /// Mask of the voxels carrying `label`.
    pub fn component_mask(&self, label: u32) -> MaskVolume {
        let buf = self.labels.iter().map(|&l| (l == label && label != 0) as u8).collect();
        MaskVolume::from_voxels(self.dims, buf).expect("labels match dims")
    }
}

/// Label connected foreground regions. Labels are assigned 1..=k in order of
/// first encounter during a storage-order scan.
pub fn connected_components(mask: &MaskVolume, connectivity: Connectivity) -> Components {
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; mask.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for seed in mask.foreground_indices() {
        if labels[seed] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[seed] = label;
        queue.push_back(seed);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let [x, y, z] = mask.coords(i);
            for d in &offsets {
                let (nx, ny, nz) = (x as i64 + d[0], y as i64 + d[1], z as i64 + d[2]);
                if mask.get_signed(nx, ny, nz) {
                    let j = mask.index(nx as usize, ny as usize, nz as usize);
                    if labels[j] == 0 {
                        labels[j] = label;
                        queue.push_back(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    Components { dims: mask.dims(), labels, count: sizes.len(), sizes }
}

/// Minimal box holding every foreground voxel; `None` for an empty mask.
pub fn bounding_box(mask: &MaskVolume) -> Option<BoundingBox> {
    let mut min = [usize::MAX; 3];
    let mut max = [0usize; 3];
    let mut any = false;
    for i in mask.foreground_indices() {
        any = true;
        let p = mask.coords(i);
        for a in 0..3 {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a] + 1);
        }
    }
    any.then(|| BoundingBox::new(min, max))
}

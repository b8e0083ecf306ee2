//! ROI-based expanded patch selection.
//!
//! The ROI bounding box is tiled with `d_p`-sized core patches overlapping by
//! at least `d_o`; each core is grown by `d_b` per side (clipped to the
//! image) and, every epoch, one `d_p`-sized training patch is drawn
//! uniformly inside each expanded box. The patch count per case therefore
//! depends only on ROI extents, not on chance.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphology::{self, BoundingBox, Connectivity};
use crate::rng;
use crate::volumes::MaskVolume;

pub const PLAN_SCHEMA: &str = "reps_plan.v1";
pub const EPOCH_SCHEMA: &str = "reps_epoch.v1";

#[derive(Debug, Error, PartialEq)]
pub enum RepsError {
    #[error("mask is empty; there is no ROI to tile")]
    EmptyMask,
    #[error("invalid patch parameters: {0}")]
    BadParams(String),
    #[error("image extent {extent} on axis {axis} is smaller than patch size {d_p}")]
    ImageTooSmall { axis: usize, extent: usize, d_p: usize },
    #[error("gave up after {attempts} attempts: only {found} of {requested} positive patches found")]
    RejectionCapExhausted { attempts: u64, found: usize, requested: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchParams {
    /// Core patch edge.
    pub d_p: usize,
    /// Minimum overlap between neighbouring cores.
    pub d_o: usize,
    /// Expansion per side.
    pub d_b: usize,
}

impl Default for PatchParams {
    fn default() -> Self {
        Self { d_p: 64, d_o: 16, d_b: 16 }
    }
}

impl PatchParams {
    pub fn validate(&self) -> Result<(), RepsError> {
        if self.d_p == 0 || self.d_o >= self.d_p {
            return Err(RepsError::BadParams(format!("need d_p > d_o >= 0, got d_p={} d_o={}", self.d_p, self.d_o)));
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.d_p - self.d_o
    }
}

/// Number of cores along an axis whose ROI extent is `extent`.
pub fn patches_per_axis(extent: usize, params: &PatchParams) -> usize {
    if extent <= params.d_p {
        1
    } else {
        (extent - params.d_p).div_ceil(params.stride()) + 1
    }
}

/// Core start coordinates along one axis, for ROI span `[lo, hi)` in an
/// image of `dim` voxels.
fn axis_starts(lo: usize, hi: usize, dim: usize, params: &PatchParams) -> Vec<usize> {
    let d_p = params.d_p;
    let extent = hi - lo;
    if extent <= d_p {
        // Single core centred on the ROI, shifted to stay inside the image.
        let centred = lo as i64 - ((d_p - extent) / 2) as i64;
        return vec![centred.clamp(0, (dim - d_p) as i64) as usize];
    }
    let n = patches_per_axis(extent, params);
    let mut starts: Vec<usize> = (0..n - 1).map(|i| lo + i * params.stride()).collect();
    starts.push(hi - d_p);
    starts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TilingMode {
    /// One tiling of the bounding box of all foreground.
    #[default]
    Union,
    /// A separate tiling per 26-connected component.
    PerComponent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchPlan {
    pub schema: String,
    pub image_dims: [usize; 3],
    pub roi_bbox: BoundingBox,
    pub params: PatchParams,
    pub mode: TilingMode,
    pub core_boxes: Vec<BoundingBox>,
    pub expanded_boxes: Vec<BoundingBox>,
}

impl PatchPlan {
    pub fn patch_count(&self) -> usize {
        self.core_boxes.len()
    }

    /// True when every foreground voxel of `mask` lies in some core box.
    pub fn covers(&self, mask: &MaskVolume) -> bool {
        mask.foreground_indices().all(|i| {
            let p = mask.coords(i);
            self.core_boxes.iter().any(|b| b.contains_point(p))
        })
    }
}

fn tile(bbox: &BoundingBox, dims: [usize; 3], params: &PatchParams) -> (Vec<BoundingBox>, Vec<BoundingBox>) {
    let per_axis: Vec<Vec<usize>> = (0..3).map(|a| axis_starts(bbox.min[a], bbox.max[a], dims[a], params)).collect();
    let mut cores = Vec::new();
    let mut expanded = Vec::new();
    for &z in &per_axis[2] {
        for &y in &per_axis[1] {
            for &x in &per_axis[0] {
                let min = [x, y, z];
                let max = min.map(|s| s + params.d_p);
                cores.push(BoundingBox::new(min, max));
                let emin = min.map(|s| s.saturating_sub(params.d_b));
                let emax = [0, 1, 2].map(|a| (max[a] + params.d_b).min(dims[a]));
                expanded.push(BoundingBox::new(emin, emax));
            }
        }
    }
    (cores, expanded)
}

/// Plan the tiling for one case.
pub fn plan_patches(mask: &MaskVolume, params: &PatchParams) -> Result<PatchPlan, RepsError> {
    plan_patches_with_mode(mask, params, TilingMode::Union)
}

pub fn plan_patches_with_mode(mask: &MaskVolume, params: &PatchParams, mode: TilingMode) -> Result<PatchPlan, RepsError> {
    params.validate()?;
    let dims = mask.dims();
    if let Some(axis) = (0..3).find(|&a| dims[a] < params.d_p) {
        return Err(RepsError::ImageTooSmall { axis, extent: dims[axis], d_p: params.d_p });
    }
    let roi_bbox = morphology::bounding_box(mask).ok_or(RepsError::EmptyMask)?;
    let (core_boxes, expanded_boxes) = match mode {
        TilingMode::Union => tile(&roi_bbox, dims, params),
        TilingMode::PerComponent => {
            let comps = morphology::connected_components(mask, Connectivity::TwentySix);
            let mut cores = Vec::new();
            let mut exp = Vec::new();
            for label in 1..=comps.count as u32 {
                let b = morphology::bounding_box(&comps.component_mask(label)).expect("labels are non-empty");
                let (c, e) = tile(&b, dims, params);
                cores.extend(c);
                exp.extend(e);
            }
            (cores, exp)
        }
    };
    Ok(PatchPlan { schema: PLAN_SCHEMA.to_string(), image_dims: dims, roi_bbox, params: *params, mode, core_boxes, expanded_boxes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSample {
    pub schema: String,
    pub epoch_index: u64,
    pub master_seed: u64,
    pub boxes: Vec<BoundingBox>,
}

/// Draw one `d_p`-sized box inside each expanded box. Box `i` uses the
/// stream derived from `(master_seed, epoch_index, i)`.
pub fn sample_epoch(plan: &PatchPlan, master_seed: u64, epoch_index: u64) -> EpochSample {
    let d_p = plan.params.d_p;
    let boxes = plan
        .expanded_boxes
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut s = rng::stream(master_seed, &[rng::tag("epoch"), epoch_index, i as u64]);
            let min = [0, 1, 2].map(|a| {
                let slack = e.extents()[a] - d_p;
                e.min[a] + if slack == 0 { 0 } else { s.random_range(0..=slack) }
            });
            BoundingBox::new(min, min.map(|m| m + d_p))
        })
        .collect();
    EpochSample { schema: EPOCH_SCHEMA.to_string(), epoch_index, master_seed, boxes }
}

/// Summed-volume table for O(1) box foreground counts.
struct PrefixSum {
    dims: [usize; 3],
    table: Vec<u32>,
}

impl PrefixSum {
    fn new(mask: &MaskVolume) -> Self {
        let [nx, ny, nz] = mask.dims();
        let (px, py) = (nx + 1, ny + 1);
        let mut table = vec![0u32; px * py * (nz + 1)];
        let at = |x: usize, y: usize, z: usize| x + px * (y + py * z);
        for z in 1..=nz {
            for y in 1..=ny {
                for x in 1..=nx {
                    let v = mask.get(x - 1, y - 1, z - 1) as i64;
                    let s = v + table[at(x - 1, y, z)] as i64 + table[at(x, y - 1, z)] as i64 + table[at(x, y, z - 1)] as i64
                        - table[at(x - 1, y - 1, z)] as i64
                        - table[at(x - 1, y, z - 1)] as i64
                        - table[at(x, y - 1, z - 1)] as i64
                        + table[at(x - 1, y - 1, z - 1)] as i64;
                    table[at(x, y, z)] = s as u32;
                }
            }
        }
        Self { dims: [px, py, nz + 1], table }
    }

    fn count(&self, b: &BoundingBox) -> u64 {
        let [px, py, _] = self.dims;
        let t = |x: usize, y: usize, z: usize| self.table[x + px * (y + py * z)] as i64;
        let ([x0, y0, z0], [x1, y1, z1]) = (b.min, b.max);
        (t(x1, y1, z1) - t(x0, y1, z1) - t(x1, y0, z1) - t(x1, y1, z0) + t(x0, y0, z1) + t(x0, y1, z0) + t(x1, y0, z0)
            - t(x0, y0, z0)) as u64
    }
}

/// Attempts allowed per requested patch in [`baseline_random_positive`].
pub const BASELINE_ATTEMPTS_PER_PATCH: u64 = 100_000;

/// Random-positive baseline: `n_patches` boxes of edge `d_p`, uniformly
/// placed over valid origins, each containing at least one foreground voxel.
pub fn baseline_random_positive(mask: &MaskVolume, n_patches: usize, d_p: usize, seed: u64) -> Result<Vec<BoundingBox>, RepsError> {
    if n_patches == 0 {
        return Ok(Vec::new());
    }
    if d_p == 0 {
        return Err(RepsError::BadParams("d_p must be >= 1".into()));
    }
    let dims = mask.dims();
    if let Some(axis) = (0..3).find(|&a| dims[a] < d_p) {
        return Err(RepsError::ImageTooSmall { axis, extent: dims[axis], d_p });
    }
    if mask.is_blank() {
        return Err(RepsError::EmptyMask);
    }
    let sums = PrefixSum::new(mask);
    let mut s = rng::stream(seed, &[rng::tag("baseline")]);
    let cap = BASELINE_ATTEMPTS_PER_PATCH * n_patches as u64;
    let mut out = Vec::with_capacity(n_patches);
    let mut attempts = 0;
    while out.len() < n_patches {
        if attempts == cap {
            return Err(RepsError::RejectionCapExhausted { attempts, found: out.len(), requested: n_patches });
        }
        attempts += 1;
        let min = [0, 1, 2].map(|a| s.random_range(0..=dims[a] - d_p));
        let b = BoundingBox::new(min, min.map(|m| m + d_p));
        if sums.count(&b) > 0 {
            out.push(b);
        }
    }
    Ok(out)
}

/// Core patch count for each case.
pub fn patch_census(dataset: &[MaskVolume], params: &PatchParams) -> Result<Vec<usize>, RepsError> {
    dataset.iter().map(|m| plan_patches(m, params).map(|p| p.patch_count())).collect()
}

/// CSV with one box per row: `kind,index,x0,y0,z0,x1,y1,z1`.
pub fn plan_csv(plan: &PatchPlan) -> String {
    let mut out = String::from("kind,index,x0,y0,z0,x1,y1,z1\n");
    for (kind, boxes) in [("core", &plan.core_boxes), ("expanded", &plan.expanded_boxes)] {
        for (i, b) in boxes.iter().enumerate() {
            let a = b.to_array();
            out.push_str(&format!("{kind},{i},{},{},{},{},{},{}\n", a[0], a[1], a[2], a[3], a[4], a[5]));
        }
    }
    out
}

pub fn epoch_csv(sample: &EpochSample) -> String {
    let mut out = String::from("epoch,index,x0,y0,z0,x1,y1,z1\n");
    for (i, b) in sample.boxes.iter().enumerate() {
        let a = b.to_array();
        out.push_str(&format!("{},{i},{},{},{},{},{},{}\n", sample.epoch_index, a[0], a[1], a[2], a[3], a[4], a[5]));
    }
    out
}

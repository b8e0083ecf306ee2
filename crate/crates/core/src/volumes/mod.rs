//! Binary 3D mask volumes: the in-memory type, NIfTI-1 I/O, and synthetic
//! shape generation.

mod nifti;
mod synth;

pub use nifti::{read_mask, read_mask_from_bytes, write_mask, write_mask_described, write_mask_to_bytes, NiftiError};
pub use synth::{synth, Shape, SynthError, SyntheticSpec};

use thiserror::Error;

/// Errors raised when a [`MaskVolume`] would violate its invariants.
#[derive(Debug, Error, PartialEq)]
pub enum VolumeError {
    #[error("dims must be positive, got {0:?}")]
    BadDims([usize; 3]),
    #[error("spacing must be finite and positive, got {0:?}")]
    BadSpacing([f64; 3]),
    #[error("voxel buffer has {got} entries, dims require {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("voxel at index {index} has value {value}, expected 0 or 1")]
    NotBinary { index: usize, value: u8 },
    #[error("volume has {count} voxels, exceeding addressable size")]
    TooLarge { count: u128 },
}

/// A binary voxel grid stored x-fastest.
///
/// The voxel buffer holds only `0` and `1`. Spacing is in millimetres and is
/// carried through I/O; geometry operations work in voxel units.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskVolume {
    dims: [usize; 3],
    spacing: [f64; 3],
    voxels: Vec<u8>,
    affine: Option<[[f64; 4]; 4]>,
}

fn checked_len(dims: [usize; 3]) -> Result<usize, VolumeError> {
    if dims.contains(&0) {
        return Err(VolumeError::BadDims(dims));
    }
    dims[0]
        .checked_mul(dims[1])
        .and_then(|v| v.checked_mul(dims[2]))
        .ok_or(VolumeError::TooLarge {
            count: dims.iter().map(|&d| d as u128).product(),
        })
}

impl MaskVolume {
    /// All-background volume with unit spacing.
    pub fn empty(dims: [usize; 3]) -> Result<Self, VolumeError> {
        let len = checked_len(dims)?;
        Ok(Self { dims, spacing: [1.0; 3], voxels: vec![0; len], affine: None })
    }

    /// Build from an explicit voxel buffer, validating every invariant.
    pub fn from_voxels(dims: [usize; 3], voxels: Vec<u8>) -> Result<Self, VolumeError> {
        let expected = checked_len(dims)?;
        if voxels.len() != expected {
            return Err(VolumeError::LengthMismatch { expected, got: voxels.len() });
        }
        if let Some((index, &value)) = voxels.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(VolumeError::NotBinary { index, value });
        }
        Ok(Self { dims, spacing: [1.0; 3], voxels, affine: None })
    }

    /// Build from a predicate over voxel coordinates.
    pub fn from_fn(
        dims: [usize; 3],
        mut inside: impl FnMut(usize, usize, usize) -> bool,
    ) -> Result<Self, VolumeError> {
        let mut m = Self::empty(dims)?;
        let [nx, ny, nz] = dims;
        let mut i = 0;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    m.voxels[i] = inside(x, y, z) as u8;
                    i += 1;
                }
            }
        }
        Ok(m)
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Result<Self, VolumeError> {
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(VolumeError::BadSpacing(spacing));
        }
        if spacing.iter().any(|&s| (s - spacing[0]).abs() > 1e-6 * spacing[0]) {
            log::warn!(
                "anisotropic spacing {:?}: geometry is computed in voxel units",
                spacing
            );
        }
        self.spacing = spacing;
        Ok(self)
    }

    pub fn with_affine(mut self, affine: Option<[[f64; 4]; 4]>) -> Self {
        self.affine = affine;
        self
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn affine(&self) -> Option<&[[f64; 4]; 4]> {
        self.affine.as_ref()
    }

    /// Raw x-fastest buffer of 0/1 values.
    pub fn voxels(&self) -> &[u8] {
        &self.voxels
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    /// True when the grid has no voxels at all; never the case for a valid
    /// volume. Use [`MaskVolume::is_blank`] to test for an empty foreground.
    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// Foreground voxel count.
    pub fn count(&self) -> usize {
        self.voxels.iter().map(|&v| v as usize).sum()
    }

    /// True when no voxel is foreground.
    pub fn is_blank(&self) -> bool {
        self.voxels.iter().all(|&v| v == 0)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.voxels[self.index(x, y, z)] != 0
    }

    /// Value at signed coordinates; out-of-grid reads as background.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64, z: i64) -> bool {
        let [nx, ny, nz] = self.dims;
        if x < 0 || y < 0 || z < 0 || x >= nx as i64 || y >= ny as i64 || z >= nz as i64 {
            return false;
        }
        self.get(x as usize, y as usize, z as usize)
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.index(x, y, z);
        self.voxels[i] = value as u8;
    }

    /// Flat indices of foreground voxels in storage order.
    pub fn foreground_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.voxels.iter().enumerate().filter(|(_, &v)| v != 0).map(|(i, _)| i)
    }

    /// Same grid and metadata with a new voxel buffer. The buffer must be
    /// binary and of equal length; crate-internal callers guarantee this.
    pub(crate) fn with_buffer(&self, voxels: Vec<u8>) -> Self {
        debug_assert_eq!(voxels.len(), self.voxels.len());
        debug_assert!(voxels.iter().all(|&v| v <= 1));
        Self { dims: self.dims, spacing: self.spacing, voxels, affine: self.affine }
    }
}

//! Planning toolkit for patch-based 3D segmentation.
//!
//! The crate answers one question: how much annotated mask data does a task
//! need? It does so in three parts:
//!
//! * [`minbat`] perturbs ground-truth masks with a short chain of randomized
//!   dilations and erosions and reads off the DSC that annotation-level
//!   boundary noise alone already costs. [`theory`] holds the closed-form
//!   model of the same quantity as a function of the surface/volume ratio.
//! * [`reps`] plans a standardized patch tiling of each case's ROI so the
//!   number of training patches per case is regulated.
//! * [`curves`] fits learning-curve laws to `(data amount, DSC)` points and
//!   inverts them to find the amount at which the target DSC is reached.
//!
//! [`volumes`] and [`morphology`] provide the voxel-grid substrate.

pub mod curves;
pub mod minbat;
pub mod morphology;
pub mod quadrature;
pub mod reps;
pub mod rng;
pub mod theory;
pub mod volumes;

pub use morphology::{BoundingBox, DscBreakdown, StructuringElement, SurfaceVolumeStats};
pub use volumes::MaskVolume;

//! Coarse-to-fine volumetric cranial implant prediction.
//!
//! Binary skull voxel grids in, predicted implant voxel grids out. The
//! pipeline downsamples a defective skull, predicts a coarse implant with
//! one encoder-decoder network, localizes the defect through a bounding
//! box with margin and zero-padding, predicts a fine implant with a second
//! network on the cropped high-resolution region, and restores the result
//! to the original frame. Companion modules cover case synthesis, dice
//! training, and the DSC / Hausdorff / reconstruction-error metrics.

pub mod bbox;
pub mod cases;
pub mod components;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod nn;
pub mod nrrd;
pub mod pipeline;
pub mod resample;

pub use bbox::{BBox, Placement};
pub use grid::{GridKind, VoxelGrid};

//! Dense voxel-grid representation.
//!
//! A [`VoxelGrid`] is the universal currency of the pipeline: CT intensity
//! volumes, binary skull/implant masks and network probability fields all
//! live in the same x-fastest dense layout with per-axis spacing in mm.

use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// What the scalar values of a grid mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridKind {
    /// Hounsfield intensities, signed 16-bit range.
    Hu,
    /// Binary mask, values in {0, 1}.
    Mask,
    /// Probability field, values in [0, 1].
    Probability,
}

/// Dense 3D scalar volume, x-fastest storage order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    dims: [usize; 3],
    spacing: [f64; 3],
    kind: GridKind,
    data: Vec<f32>,
}

impl VoxelGrid {
    /// Builds a grid after validating the type invariants.
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        kind: GridKind,
        data: Vec<f32>,
    ) -> Result<Self, GridError> {
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or(GridError::DimsOverflow { dims })?;
        if dims.iter().any(|&d| d == 0) {
            return Err(GridError::ZeroDim { dims });
        }
        if data.len() != n {
            return Err(GridError::DataLength {
                expected: n,
                got: data.len(),
            });
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(GridError::BadSpacing { spacing });
        }
        let grid = Self {
            dims,
            spacing,
            kind,
            data,
        };
        grid.check_values()?;
        Ok(grid)
    }

    fn check_values(&self) -> Result<(), GridError> {
        match self.kind {
            GridKind::Mask => {
                if let Some(&v) = self.data.iter().find(|&&v| v != 0.0 && v != 1.0) {
                    return Err(GridError::BadMaskValue { value: v });
                }
            }
            GridKind::Probability => {
                if let Some(&v) = self
                    .data
                    .iter()
                    .find(|&&v| !(0.0..=1.0).contains(&v) || !v.is_finite())
                {
                    return Err(GridError::BadProbabilityValue { value: v });
                }
            }
            GridKind::Hu => {}
        }
        Ok(())
    }

    /// All-zero grid of the given kind.
    pub fn zeros(dims: [usize; 3], spacing: [f64; 3], kind: GridKind) -> Result<Self, GridError> {
        let n = dims[0] * dims[1] * dims[2];
        Self::new(dims, spacing, kind, vec![0.0; n])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn voxel_count(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.dims[0] && y < self.dims[1] && z < self.dims[2]);
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.index(x, y, z)]
    }

    /// Mutable access for in-place construction; invariants are the caller's
    /// responsibility until the grid is handed off.
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Number of nonzero voxels.
    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    /// Linear indices of nonzero voxels.
    pub fn foreground_indices(&self) -> Vec<usize> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// (x, y, z) from a linear index.
    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let y = (idx / self.dims[0]) % self.dims[1];
        let z = idx / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    /// Reinterprets the values under a new kind, revalidating.
    pub fn with_kind(mut self, kind: GridKind) -> Result<Self, GridError> {
        self.kind = kind;
        self.check_values()?;
        Ok(self)
    }

    /// Voxelwise logical AND of two masks.
    pub fn mask_and(&self, other: &VoxelGrid) -> Result<VoxelGrid, GridError> {
        self.mask_zip(other, |a, b| a != 0.0 && b != 0.0)
    }

    /// Voxelwise logical OR of two masks.
    pub fn mask_or(&self, other: &VoxelGrid) -> Result<VoxelGrid, GridError> {
        self.mask_zip(other, |a, b| a != 0.0 || b != 0.0)
    }

    /// Voxelwise set difference `self AND NOT other`.
    pub fn mask_minus(&self, other: &VoxelGrid) -> Result<VoxelGrid, GridError> {
        self.mask_zip(other, |a, b| a != 0.0 && b == 0.0)
    }

    fn mask_zip(
        &self,
        other: &VoxelGrid,
        f: impl Fn(f32, f32) -> bool,
    ) -> Result<VoxelGrid, GridError> {
        if self.kind != GridKind::Mask || other.kind != GridKind::Mask {
            return Err(GridError::KindMismatch {
                expected: GridKind::Mask,
                got: if self.kind != GridKind::Mask {
                    self.kind
                } else {
                    other.kind
                },
            });
        }
        if self.dims != other.dims {
            return Err(GridError::DimsMismatch {
                a: self.dims,
                b: other.dims,
            });
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| if f(a, b) { 1.0 } else { 0.0 })
            .collect();
        VoxelGrid::new(self.dims, self.spacing, GridKind::Mask, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_length_mismatch() {
        let err = VoxelGrid::new([2, 2, 2], [1.0; 3], GridKind::Mask, vec![0.0; 7]).unwrap_err();
        assert!(matches!(err, GridError::DataLength { expected: 8, got: 7 }));
    }

    #[test]
    fn rejects_bad_mask_values() {
        let err =
            VoxelGrid::new([1, 1, 2], [1.0; 3], GridKind::Mask, vec![0.0, 0.5]).unwrap_err();
        assert!(matches!(err, GridError::BadMaskValue { .. }));
    }

    #[test]
    fn rejects_nonpositive_spacing() {
        let err =
            VoxelGrid::new([1, 1, 1], [1.0, 0.0, 1.0], GridKind::Hu, vec![0.0]).unwrap_err();
        assert!(matches!(err, GridError::BadSpacing { .. }));
    }

    #[test]
    fn mask_algebra() {
        let a = VoxelGrid::new([2, 1, 1], [1.0; 3], GridKind::Mask, vec![1.0, 0.0]).unwrap();
        let b = VoxelGrid::new([2, 1, 1], [1.0; 3], GridKind::Mask, vec![1.0, 1.0]).unwrap();
        assert_eq!(a.mask_and(&b).unwrap().data(), &[1.0, 0.0]);
        assert_eq!(a.mask_or(&b).unwrap().data(), &[1.0, 1.0]);
        assert_eq!(b.mask_minus(&a).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn coords_roundtrip() {
        let g = VoxelGrid::zeros([3, 4, 5], [1.0; 3], GridKind::Mask).unwrap();
        for idx in 0..g.voxel_count() {
            let [x, y, z] = g.coords(idx);
            assert_eq!(g.index(x, y, z), idx);
        }
    }
}

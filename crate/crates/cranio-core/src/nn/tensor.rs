//! Dense channel-major tensor carrying layer activations.

use crate::error::GridError;
use crate::grid::{GridKind, VoxelGrid};

/// `(channels, nx, ny, nz)` dense f64 tensor, x-fastest within a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub dims: [usize; 3],
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, dims: [usize; 3]) -> Self {
        Self {
            channels,
            dims,
            data: vec![0.0; channels * dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_data(channels: usize, dims: [usize; 3], data: Vec<f64>) -> Self {
        assert_eq!(data.len(), channels * dims[0] * dims[1] * dims[2]);
        Self {
            channels,
            dims,
            data,
        }
    }

    /// Single-channel tensor from a voxel grid.
    pub fn from_grid(grid: &VoxelGrid) -> Self {
        Self {
            channels: 1,
            dims: grid.dims(),
            data: grid.data().iter().map(|&v| v as f64).collect(),
        }
    }

    /// Single-channel tensor back to a probability grid.
    pub fn to_probability_grid(&self, spacing: [f64; 3]) -> Result<VoxelGrid, GridError> {
        assert_eq!(self.channels, 1);
        let data = self
            .data
            .iter()
            .map(|&v| (v as f32).clamp(0.0, 1.0))
            .collect();
        VoxelGrid::new(self.dims, spacing, GridKind::Probability, data)
    }

    pub fn spatial_len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn index(&self, c: usize, x: usize, y: usize, z: usize) -> usize {
        ((c * self.dims[2] + z) * self.dims[1] + y) * self.dims[0] + x
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.spatial_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

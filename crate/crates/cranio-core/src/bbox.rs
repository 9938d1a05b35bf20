//! Axis-aligned box algebra: localization, crop, zero-padding and the
//! inverse restore step that maps fine predictions back to full resolution.

use serde::{Deserialize, Serialize};

use crate::error::GridError;
use crate::grid::{GridKind, VoxelGrid};

/// Half-open integer voxel box: `min <= v < max` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl BBox {
    pub fn new(min: [usize; 3], max: [usize; 3]) -> Result<Self, GridError> {
        let b = Self { min, max };
        for a in 0..3 {
            if min[a] >= max[a] {
                return Err(GridError::BoxOutOfRange {
                    bbox: format!("{b:?}"),
                    dims: max,
                });
            }
        }
        Ok(b)
    }

    pub fn dims(&self) -> [usize; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn volume(&self) -> usize {
        let d = self.dims();
        d[0] * d[1] * d[2]
    }

    pub fn contains_point(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| self.min[a] <= p[a] && p[a] < self.max[a])
    }

    pub fn fits_in(&self, dims: [usize; 3]) -> bool {
        (0..3).all(|a| self.max[a] <= dims[a])
    }
}

/// Where a cropped block sits inside a padded canvas, with enough context
/// to undo both the padding and the crop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    /// Offset of the block inside the canvas.
    pub offset: [usize; 3],
    /// Canvas dims the block was embedded into.
    pub canvas_dims: [usize; 3],
    /// Box the block was cropped from in the source grid.
    pub source_bbox: BBox,
    /// Dims of the original source grid.
    pub source_dims: [usize; 3],
}

/// Tight x/y bounds of the nonzero z-projection, with a fixed-length z window.
///
/// The z window has length `min(z_extent, nz)` and is centered on the
/// foreground z-centroid, clamped inside the grid.
pub fn bbox_xy(mask: &VoxelGrid, z_extent: usize) -> Result<BBox, GridError> {
    if mask.kind() != GridKind::Mask {
        return Err(GridError::KindMismatch {
            expected: GridKind::Mask,
            got: mask.kind(),
        });
    }
    let [nx, ny, nz] = mask.dims();
    let mut xlo = nx;
    let mut xhi = 0usize;
    let mut ylo = ny;
    let mut yhi = 0usize;
    let mut zsum = 0u64;
    let mut count = 0u64;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if mask.get(x, y, z) != 0.0 {
                    xlo = xlo.min(x);
                    xhi = xhi.max(x + 1);
                    ylo = ylo.min(y);
                    yhi = yhi.max(y + 1);
                    zsum += z as u64;
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(GridError::EmptyMask);
    }
    let w = z_extent.min(nz).max(1);
    let centroid = (zsum as f64 / count as f64).round() as usize;
    let half = w / 2;
    let start = centroid.saturating_sub(half).min(nz - w);
    BBox::new([xlo, ylo, start], [xhi, yhi, start + w])
}

/// Widens the x/y bounds by `m` on each side, clamped to the host dims.
/// The z bounds are left untouched.
pub fn expand_margin(b: BBox, m: usize, host_dims: [usize; 3]) -> BBox {
    let mut min = b.min;
    let mut max = b.max;
    for a in 0..2 {
        min[a] = min[a].saturating_sub(m);
        max[a] = (max[a] + m).min(host_dims[a]);
    }
    BBox { min, max }
}

/// Copies the sub-grid inside `b`. Spacing is preserved.
pub fn crop(grid: &VoxelGrid, b: BBox) -> Result<VoxelGrid, GridError> {
    if !b.fits_in(grid.dims()) {
        return Err(GridError::BoxOutOfRange {
            bbox: format!("{b:?}"),
            dims: grid.dims(),
        });
    }
    let d = b.dims();
    let mut data = Vec::with_capacity(b.volume());
    for z in b.min[2]..b.max[2] {
        for y in b.min[1]..b.max[1] {
            for x in b.min[0]..b.max[0] {
                data.push(grid.get(x, y, z));
            }
        }
    }
    VoxelGrid::new(d, grid.spacing(), grid.kind(), data)
}

/// Embeds `grid` centered in an all-zero canvas, recording how to undo it.
///
/// `source_bbox` is carried through so a later [`restore`] can place the
/// block back into the full-resolution frame it was cropped from; callers
/// that did not crop first can pass the whole-grid box.
pub fn zero_pad_center(
    grid: &VoxelGrid,
    canvas_dims: [usize; 3],
    source_bbox: BBox,
    source_dims: [usize; 3],
) -> Result<(VoxelGrid, Placement), GridError> {
    let d = grid.dims();
    for a in 0..3 {
        if d[a] > canvas_dims[a] {
            return Err(GridError::GridLargerThanCanvas {
                dims: d,
                canvas: canvas_dims,
            });
        }
    }
    if source_bbox.dims() != d || !source_bbox.fits_in(source_dims) {
        return Err(GridError::BadPlacement {
            reason: format!(
                "source_bbox {source_bbox:?} does not match block dims {d:?} in {source_dims:?}"
            ),
        });
    }
    let offset = [
        (canvas_dims[0] - d[0]) / 2,
        (canvas_dims[1] - d[1]) / 2,
        (canvas_dims[2] - d[2]) / 2,
    ];
    let mut canvas = VoxelGrid::zeros(canvas_dims, grid.spacing(), grid.kind())?;
    for z in 0..d[2] {
        for y in 0..d[1] {
            for x in 0..d[0] {
                let v = grid.get(x, y, z);
                let idx = canvas.index(x + offset[0], y + offset[1], z + offset[2]);
                canvas.data_mut()[idx] = v;
            }
        }
    }
    let placement = Placement {
        offset,
        canvas_dims,
        source_bbox,
        source_dims,
    };
    Ok((canvas, placement))
}

/// Inverse of the crop + zero-padding chain: pulls the block out of the
/// canvas and writes it at its original position inside an all-zero grid
/// of the original full-resolution dims.
pub fn restore(pred: &VoxelGrid, p: &Placement) -> Result<VoxelGrid, GridError> {
    if pred.dims() != p.canvas_dims {
        return Err(GridError::BadPlacement {
            reason: format!(
                "prediction dims {:?} do not match canvas dims {:?}",
                pred.dims(),
                p.canvas_dims
            ),
        });
    }
    let d = p.source_bbox.dims();
    for a in 0..3 {
        if p.offset[a] + d[a] > p.canvas_dims[a] {
            return Err(GridError::BadPlacement {
                reason: format!("offset {:?} + block {:?} exceeds canvas", p.offset, d),
            });
        }
    }
    let mut out = VoxelGrid::zeros(p.source_dims, pred.spacing(), pred.kind())?;
    for z in 0..d[2] {
        for y in 0..d[1] {
            for x in 0..d[0] {
                let v = pred.get(x + p.offset[0], y + p.offset[1], z + p.offset[2]);
                let idx = out.index(
                    x + p.source_bbox.min[0],
                    y + p.source_bbox.min[1],
                    z + p.source_bbox.min[2],
                );
                out.data_mut()[idx] = v;
            }
        }
    }
    Ok(out)
}

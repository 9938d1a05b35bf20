//! 3D connected component labeling over binary masks.

use crate::error::GridError;
use crate::grid::{GridKind, VoxelGrid};

/// Neighborhood used for connectivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Six,
    TwentySix,
}

impl Connectivity {
    fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::new();
        for dz in -1isize..=1 {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    match self {
                        Connectivity::Six => {
                            if dx.abs() + dy.abs() + dz.abs() == 1 {
                                out.push([dx, dy, dz]);
                            }
                        }
                        Connectivity::TwentySix => out.push([dx, dy, dz]),
                    }
                }
            }
        }
        out
    }
}

/// One maximal connected foreground region.
#[derive(Debug, Clone)]
pub struct Component {
    /// Linear voxel indices, ascending.
    pub voxels: Vec<usize>,
}

impl Component {
    pub fn size(&self) -> usize {
        self.voxels.len()
    }
}

/// Labels maximal connected foreground regions via iterative DFS.
///
/// Components are ordered by decreasing size, ties broken by the smallest
/// linear index they contain, so labeling is deterministic.
pub fn connected_components_3d(
    mask: &VoxelGrid,
    connectivity: Connectivity,
) -> Result<Vec<Component>, GridError> {
    if mask.kind() != GridKind::Mask {
        return Err(GridError::KindMismatch {
            expected: GridKind::Mask,
            got: mask.kind(),
        });
    }
    let [nx, ny, nz] = mask.dims();
    let offsets = connectivity.offsets();
    let data = mask.data();
    let mut visited = vec![false; data.len()];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..data.len() {
        if data[seed] == 0.0 || visited[seed] {
            continue;
        }
        let mut voxels = Vec::new();
        visited[seed] = true;
        stack.push(seed);
        while let Some(idx) = stack.pop() {
            voxels.push(idx);
            let [x, y, z] = mask.coords(idx);
            for &[dx, dy, dz] in &offsets {
                let (px, py, pz) = (x as isize + dx, y as isize + dy, z as isize + dz);
                if px < 0 || py < 0 || pz < 0 {
                    continue;
                }
                let (px, py, pz) = (px as usize, py as usize, pz as usize);
                if px >= nx || py >= ny || pz >= nz {
                    continue;
                }
                let nidx = (pz * ny + py) * nx + px;
                if data[nidx] != 0.0 && !visited[nidx] {
                    visited[nidx] = true;
                    stack.push(nidx);
                }
            }
        }
        voxels.sort_unstable();
        components.push(Component { voxels });
    }
    components.sort_by(|a, b| {
        b.size()
            .cmp(&a.size())
            .then_with(|| a.voxels[0].cmp(&b.voxels[0]))
    });
    Ok(components)
}

/// Keeps only the voxels of the largest connected component.
pub fn largest_component(
    mask: &VoxelGrid,
    connectivity: Connectivity,
) -> Result<VoxelGrid, GridError> {
    let components = connected_components_3d(mask, connectivity)?;
    let largest = components.first().ok_or(GridError::EmptyMask)?;
    let mut out = VoxelGrid::zeros(mask.dims(), mask.spacing(), GridKind::Mask)?;
    for &idx in &largest.voxels {
        out.data_mut()[idx] = 1.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_with(dims: [usize; 3], points: &[[usize; 3]]) -> VoxelGrid {
        let mut g = VoxelGrid::zeros(dims, [1.0; 3], GridKind::Mask).unwrap();
        for &[x, y, z] in points {
            let i = g.index(x, y, z);
            g.data_mut()[i] = 1.0;
        }
        g
    }

    #[test]
    fn two_isolated_voxels() {
        let g = mask_with([8, 8, 8], &[[0, 0, 0], [5, 5, 5]]);
        for conn in [Connectivity::Six, Connectivity::TwentySix] {
            let c = connected_components_3d(&g, conn).unwrap();
            assert_eq!(c.len(), 2);
            assert!(c.iter().all(|c| c.size() == 1));
        }
    }

    #[test]
    fn full_block_is_one_component() {
        let g = VoxelGrid::new([4, 4, 4], [1.0; 3], GridKind::Mask, vec![1.0; 64]).unwrap();
        let c = connected_components_3d(&g, Connectivity::Six).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].size(), 64);
    }

    #[test]
    fn diagonal_touch_depends_on_connectivity() {
        let g = mask_with([4, 4, 4], &[[0, 0, 0], [1, 1, 1]]);
        assert_eq!(
            connected_components_3d(&g, Connectivity::Six).unwrap().len(),
            2
        );
        assert_eq!(
            connected_components_3d(&g, Connectivity::TwentySix)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn empty_mask_yields_empty_list() {
        let g = VoxelGrid::zeros([4, 4, 4], [1.0; 3], GridKind::Mask).unwrap();
        assert!(connected_components_3d(&g, Connectivity::TwentySix)
            .unwrap()
            .is_empty());
        assert!(matches!(
            largest_component(&g, Connectivity::TwentySix),
            Err(GridError::EmptyMask)
        ));
    }

    #[test]
    fn largest_keeps_big_blob() {
        // 100-voxel blob vs 40-voxel bar
        let mut pts = Vec::new();
        for z in 0..4 {
            for y in 0..5 {
                for x in 0..5 {
                    pts.push([x, y, z]);
                }
            }
        }
        for x in 0..40 {
            pts.push([x, 15, 15]);
        }
        let g = mask_with([40, 16, 16], &pts);
        let out = largest_component(&g, Connectivity::TwentySix).unwrap();
        assert_eq!(out.foreground_count(), 100);
        assert_eq!(out.get(0, 15, 15), 0.0);
        assert_eq!(out.get(2, 2, 2), 1.0);
    }

    #[test]
    fn largest_single_component_is_identity() {
        let g = mask_with([6, 6, 6], &[[1, 1, 1], [1, 1, 2], [1, 2, 2]]);
        let out = largest_component(&g, Connectivity::Six).unwrap();
        assert_eq!(out, g);
    }
}

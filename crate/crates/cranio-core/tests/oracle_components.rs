//! Connected-component labeling and bounding-box extraction checked against
//! independent brute-force oracles on randomized volumes.

use cranio_core::components::{connected_components_3d, Connectivity};
use cranio_core::bbox::bbox_xy;
use cranio_core::{GridKind, VoxelGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mask(rng: &mut ChaCha8Rng, dims: [usize; 3], density: f64) -> VoxelGrid {
    let n = dims[0] * dims[1] * dims[2];
    let data: Vec<f32> = (0..n)
        .map(|_| if rng.gen_bool(density) { 1.0 } else { 0.0 })
        .collect();
    VoxelGrid::new(dims, [1.0, 1.0, 1.0], GridKind::Mask, data).unwrap()
}

/// Oracle: label components by repeated full-volume sweeps (label propagation
/// until fixpoint), an algorithm entirely unlike the DFS in the crate.
fn oracle_labels(mask: &VoxelGrid, conn: Connectivity) -> Vec<usize> {
    let [nx, ny, nz] = mask.dims();
    let n = nx * ny * nz;
    // start with a unique label per foreground voxel
    let mut label: Vec<usize> = (0..n)
        .map(|i| if mask.data()[i] != 0.0 { i + 1 } else { 0 })
        .collect();
    let neighbors = |x: usize, y: usize, z: usize| -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    if matches!(conn, Connectivity::Six) && manhattan != 1 {
                        continue;
                    }
                    let (px, py, pz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                    if px >= 0
                        && py >= 0
                        && pz >= 0
                        && (px as usize) < nx
                        && (py as usize) < ny
                        && (pz as usize) < nz
                    {
                        out.push([px as usize, py as usize, pz as usize]);
                    }
                }
            }
        }
        out
    };
    // propagate the minimum label until nothing changes
    loop {
        let mut changed = false;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let i = mask.index(x, y, z);
                    if label[i] == 0 {
                        continue;
                    }
                    for nb in neighbors(x, y, z) {
                        let j = mask.index(nb[0], nb[1], nb[2]);
                        if label[j] != 0 && label[j] < label[i] {
                            label[i] = label[j];
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            return label;
        }
    }
}

fn check_against_oracle(mask: &VoxelGrid, conn: Connectivity) {
    let comps = connected_components_3d(mask, conn).unwrap();
    let oracle = oracle_labels(mask, conn);

    // same voxel partition: map each oracle label to its sorted voxel set
    let mut oracle_sets: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &l) in oracle.iter().enumerate() {
        if l != 0 {
            oracle_sets.entry(l).or_default().push(i);
        }
    }
    assert_eq!(comps.len(), oracle_sets.len(), "component count");
    let mut got: Vec<Vec<usize>> = comps.iter().map(|c| c.voxels.clone()).collect();
    let mut want: Vec<Vec<usize>> = oracle_sets.into_values().collect();
    got.sort();
    want.sort();
    assert_eq!(got, want, "component voxel sets");
}

#[test]
fn components_match_label_propagation_oracle() {
    // [DERIVED] oracle: sweep-based label propagation, structurally
    // independent of the DFS implementation.
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for trial in 0..30 {
        let dims = [
            rng.gen_range(3..9usize),
            rng.gen_range(3..9usize),
            rng.gen_range(3..9usize),
        ];
        let density = match trial % 3 {
            0 => 0.1,
            1 => 0.35,
            _ => 0.7,
        };
        let mask = random_mask(&mut rng, dims, density);
        check_against_oracle(&mask, Connectivity::Six);
        check_against_oracle(&mask, Connectivity::TwentySix);
    }
}

#[test]
fn bbox_xy_matches_exhaustive_scan() {
    // [DERIVED] oracle: direct min/max scan over foreground coordinates.
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..50 {
        let dims = [
            rng.gen_range(4..16usize),
            rng.gen_range(4..16usize),
            rng.gen_range(4..16usize),
        ];
        let mask = random_mask(&mut rng, dims, 0.2);
        if mask.foreground_count() == 0 {
            continue;
        }
        let z_extent = rng.gen_range(1..=dims[2]);
        let b = bbox_xy(&mask, z_extent).unwrap();

        let (mut xmin, mut xmax, mut ymin, mut ymax) = (usize::MAX, 0, usize::MAX, 0);
        let mut zsum = 0usize;
        let mut count = 0usize;
        for idx in mask.foreground_indices() {
            let [x, y, z] = mask.coords(idx);
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
            zsum += z;
            count += 1;
        }
        assert_eq!(b.min[0], xmin);
        assert_eq!(b.max[0], xmax + 1);
        assert_eq!(b.min[1], ymin);
        assert_eq!(b.max[1], ymax + 1);

        // z window: fixed length centered on the rounded centroid, clamped
        let w = z_extent.min(dims[2]);
        assert_eq!(b.max[2] - b.min[2], w);
        assert!(b.max[2] <= dims[2]);
        let centroid = (zsum as f64 / count as f64).round() as usize;
        let start = centroid.saturating_sub(w / 2).min(dims[2] - w);
        assert_eq!(b.min[2], start);
    }
}

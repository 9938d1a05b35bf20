//! Thresholding, binarization and lattice resampling.
//!
//! Downsampling is nearest-neighbor on a half-voxel-centered coordinate map,
//! which keeps binary masks binary. Upsampling is interpolating quadratic
//! B-spline: the samples are prefiltered into spline coefficients (single
//! pole `2*sqrt(2) - 3`, mirror boundaries), then evaluated at the target
//! lattice positions.

use crate::error::GridError;
use crate::grid::{GridKind, VoxelGrid};

/// Binary mask of voxels with intensity `>= lo` (inclusive).
pub fn threshold(grid: &VoxelGrid, lo: f32) -> Result<VoxelGrid, GridError> {
    if grid.kind() != GridKind::Hu {
        return Err(GridError::KindMismatch {
            expected: GridKind::Hu,
            got: grid.kind(),
        });
    }
    let data = grid
        .data()
        .iter()
        .map(|&v| if v >= lo { 1.0 } else { 0.0 })
        .collect();
    VoxelGrid::new(grid.dims(), grid.spacing(), GridKind::Mask, data)
}

/// Binary mask of voxels with probability `>= t` (inclusive).
pub fn binarize(grid: &VoxelGrid, t: f32) -> Result<VoxelGrid, GridError> {
    if grid.kind() != GridKind::Probability {
        return Err(GridError::KindMismatch {
            expected: GridKind::Probability,
            got: grid.kind(),
        });
    }
    let data = grid
        .data()
        .iter()
        .map(|&v| if v >= t { 1.0 } else { 0.0 })
        .collect();
    VoxelGrid::new(grid.dims(), grid.spacing(), GridKind::Mask, data)
}

fn rescaled_spacing(spacing: [f64; 3], from: [usize; 3], to: [usize; 3]) -> [f64; 3] {
    [
        spacing[0] * from[0] as f64 / to[0] as f64,
        spacing[1] * from[1] as f64 / to[1] as f64,
        spacing[2] * from[2] as f64 / to[2] as f64,
    ]
}

/// Nearest-neighbor downsampling; source index per axis is
/// `floor((i + 0.5) * n / m)`.
pub fn downsample(grid: &VoxelGrid, target_dims: [usize; 3]) -> Result<VoxelGrid, GridError> {
    let dims = grid.dims();
    for a in 0..3 {
        if target_dims[a] == 0 {
            return Err(GridError::BadResampleTarget {
                from: dims,
                target: target_dims,
                reason: "zero target dim",
            });
        }
        if target_dims[a] > dims[a] {
            return Err(GridError::BadResampleTarget {
                from: dims,
                target: target_dims,
                reason: "downsample target exceeds source dims",
            });
        }
    }
    let [mx, my, mz] = target_dims;
    let map = |i: usize, m: usize, n: usize| -> usize {
        (((i as f64 + 0.5) * n as f64 / m as f64).floor() as usize).min(n - 1)
    };
    let mut data = Vec::with_capacity(mx * my * mz);
    for z in 0..mz {
        let sz = map(z, mz, dims[2]);
        for y in 0..my {
            let sy = map(y, my, dims[1]);
            for x in 0..mx {
                let sx = map(x, mx, dims[0]);
                data.push(grid.get(sx, sy, sz));
            }
        }
    }
    VoxelGrid::new(
        target_dims,
        rescaled_spacing(grid.spacing(), dims, target_dims),
        grid.kind(),
        data,
    )
}

/// Pole of the interpolating quadratic B-spline prefilter.
const POLE: f64 = -0.171_572_875_253_809_9; // 2*sqrt(2) - 3

/// In-place causal/anticausal prefilter of one line of samples, turning
/// them into quadratic B-spline coefficients. Mirror boundary conditions.
fn prefilter_line(line: &mut [f64]) {
    let n = line.len();
    if n == 1 {
        return;
    }
    let gain = (1.0 - POLE) * (1.0 - 1.0 / POLE);
    for v in line.iter_mut() {
        *v *= gain;
    }
    // causal init over the mirror-extended signal; truncate the geometric
    // series only when the line is long enough to hide the truncation
    let horizon = (f64::EPSILON.ln() / POLE.abs().ln()).ceil() as usize;
    line[0] = if horizon < n {
        let mut sum = line[0];
        let mut zn = POLE;
        for item in line.iter().take(horizon).skip(1) {
            sum += zn * item;
            zn *= POLE;
        }
        sum
    } else {
        // exact closed form over one full mirror period
        let iz = 1.0 / POLE;
        let mut zn = POLE;
        let mut z2n = POLE.powi(n as i32 - 1);
        let mut sum = line[0] + z2n * line[n - 1];
        z2n *= z2n * iz;
        for item in line.iter().take(n - 1).skip(1) {
            sum += (zn + z2n) * item;
            zn *= POLE;
            z2n *= iz;
        }
        sum / (1.0 - POLE.powi(2 * n as i32 - 2))
    };
    for k in 1..n {
        line[k] += POLE * line[k - 1];
    }
    line[n - 1] = (POLE / (POLE * POLE - 1.0)) * (line[n - 1] + POLE * line[n - 2]);
    for k in (0..n - 1).rev() {
        line[k] = POLE * (line[k + 1] - line[k]);
    }
}

/// Quadratic B-spline weights for fraction `w` in [-0.5, 0.5] around the
/// nearest knot, covering knots {i-1, i, i+1}.
#[inline]
fn spline_weights(w: f64) -> [f64; 3] {
    [
        0.5 * (0.5 - w) * (0.5 - w),
        0.75 - w * w,
        0.5 * (0.5 + w) * (0.5 + w),
    ]
}

#[inline]
fn mirror_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = (2 * n - 2) as isize;
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

/// Coefficient volume: the grid prefiltered along each axis in turn.
fn spline_coefficients(grid: &VoxelGrid) -> Vec<f64> {
    let [nx, ny, nz] = grid.dims();
    let mut coeff: Vec<f64> = grid.data().iter().map(|&v| v as f64).collect();
    let idx = |x: usize, y: usize, z: usize| (z * ny + y) * nx + x;
    let mut line = vec![0.0; nx.max(ny).max(nz)];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                line[x] = coeff[idx(x, y, z)];
            }
            prefilter_line(&mut line[..nx]);
            for x in 0..nx {
                coeff[idx(x, y, z)] = line[x];
            }
        }
    }
    for z in 0..nz {
        for x in 0..nx {
            for y in 0..ny {
                line[y] = coeff[idx(x, y, z)];
            }
            prefilter_line(&mut line[..ny]);
            for y in 0..ny {
                coeff[idx(x, y, z)] = line[y];
            }
        }
    }
    for y in 0..ny {
        for x in 0..nx {
            for z in 0..nz {
                line[z] = coeff[idx(x, y, z)];
            }
            prefilter_line(&mut line[..nz]);
            for z in 0..nz {
                coeff[idx(x, y, z)] = line[z];
            }
        }
    }
    coeff
}

/// Evaluates the quadratic spline interpolant of `grid` at a continuous
/// source coordinate. Exposed for test oracles.
pub fn spline2_sample(coeff: &[f64], dims: [usize; 3], pos: [f64; 3]) -> f64 {
    let [nx, ny, nz] = dims;
    let mut base = [0isize; 3];
    let mut weights = [[0.0; 3]; 3];
    for a in 0..3 {
        let i = (pos[a] + 0.5).floor();
        base[a] = i as isize;
        weights[a] = spline_weights(pos[a] - i);
    }
    let mut acc = 0.0;
    for dz in 0..3 {
        let z = mirror_index(base[2] + dz as isize - 1, nz);
        for dy in 0..3 {
            let y = mirror_index(base[1] + dy as isize - 1, ny);
            let wzy = weights[2][dz] * weights[1][dy];
            for dx in 0..3 {
                let x = mirror_index(base[0] + dx as isize - 1, nx);
                acc += wzy * weights[0][dx] * coeff[(z * ny + y) * nx + x];
            }
        }
    }
    acc
}

/// Quadratic-spline upsampling of a mask or probability field onto a larger
/// lattice; values are clamped to [0, 1] and the result is a probability grid.
pub fn upsample_spline2(grid: &VoxelGrid, target_dims: [usize; 3]) -> Result<VoxelGrid, GridError> {
    let dims = grid.dims();
    for a in 0..3 {
        if target_dims[a] == 0 {
            return Err(GridError::BadResampleTarget {
                from: dims,
                target: target_dims,
                reason: "zero target dim",
            });
        }
        if target_dims[a] < dims[a] {
            return Err(GridError::BadResampleTarget {
                from: dims,
                target: target_dims,
                reason: "upsample target below source dims",
            });
        }
    }
    let coeff = spline_coefficients(grid);
    let [mx, my, mz] = target_dims;
    let map = |j: usize, m: usize, n: usize| (j as f64 + 0.5) * n as f64 / m as f64 - 0.5;
    let mut data = Vec::with_capacity(mx * my * mz);
    for z in 0..mz {
        let tz = map(z, mz, dims[2]);
        for y in 0..my {
            let ty = map(y, my, dims[1]);
            for x in 0..mx {
                let tx = map(x, mx, dims[0]);
                let v = spline2_sample(&coeff, dims, [tx, ty, tz]);
                data.push(v.clamp(0.0, 1.0) as f32);
            }
        }
    }
    VoxelGrid::new(
        target_dims,
        rescaled_spacing(grid.spacing(), dims, target_dims),
        GridKind::Probability,
        data,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_boundaries() {
        let lo = VoxelGrid::new([2, 2, 2], [1.0; 3], GridKind::Hu, vec![149.0; 8]).unwrap();
        assert_eq!(threshold(&lo, 150.0).unwrap().foreground_count(), 0);
        let hi = VoxelGrid::new([2, 2, 2], [1.0; 3], GridKind::Hu, vec![150.0; 8]).unwrap();
        assert_eq!(threshold(&hi, 150.0).unwrap().foreground_count(), 8);
    }

    #[test]
    fn threshold_rejects_non_hu() {
        let g = VoxelGrid::zeros([2, 2, 2], [1.0; 3], GridKind::Mask).unwrap();
        assert!(threshold(&g, 150.0).is_err());
    }

    #[test]
    fn binarize_boundaries() {
        let g = VoxelGrid::new([1, 1, 2], [1.0; 3], GridKind::Probability, vec![0.49, 0.5])
            .unwrap();
        let m = binarize(&g, 0.5).unwrap();
        assert_eq!(m.data(), &[0.0, 1.0]);
    }

    #[test]
    fn downsample_constant_and_identity() {
        let g = VoxelGrid::new([8, 8, 8], [1.0; 3], GridKind::Mask, vec![1.0; 512]).unwrap();
        let d = downsample(&g, [4, 4, 4]).unwrap();
        assert_eq!(d.foreground_count(), 64);
        assert_eq!(d.spacing(), [2.0, 2.0, 2.0]);
        assert_eq!(downsample(&g, [8, 8, 8]).unwrap(), g);
    }

    #[test]
    fn downsample_matches_index_map_oracle() {
        // checkerboard 8^3 -> 4^3
        let mut g = VoxelGrid::zeros([8, 8, 8], [1.0; 3], GridKind::Mask).unwrap();
        for z in 0..8 {
            for y in 0..8 {
                for x in 0..8 {
                    if (x + y + z) % 2 == 0 {
                        let i = g.index(x, y, z);
                        g.data_mut()[i] = 1.0;
                    }
                }
            }
        }
        let d = downsample(&g, [4, 4, 4]).unwrap();
        let map = |i: usize| (((i as f64 + 0.5) * 8.0 / 4.0).floor()) as usize;
        for z in 0..4 {
            for y in 0..4 {
                for x in 0..4 {
                    assert_eq!(d.get(x, y, z), g.get(map(x), map(y), map(z)));
                }
            }
        }
    }

    #[test]
    fn upsample_preserves_constants() {
        let g = VoxelGrid::new([4, 4, 4], [1.0; 3], GridKind::Mask, vec![1.0; 64]).unwrap();
        let u = upsample_spline2(&g, [9, 7, 5]).unwrap();
        for &v in u.data() {
            assert!((v - 1.0).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn upsample_identity_dims() {
        let mut g = VoxelGrid::zeros([5, 4, 3], [1.0; 3], GridKind::Probability).unwrap();
        for (i, v) in g.data_mut().iter_mut().enumerate() {
            *v = ((i * 37 % 100) as f32) / 100.0;
        }
        let u = upsample_spline2(&g, [5, 4, 3]).unwrap();
        for (a, b) in g.data().iter().zip(u.data()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn upsample_ramp_matches_pointwise_oracle() {
        // 1D ramp extruded to 3D, upsampled 2x along x.
        let mut g = VoxelGrid::zeros([8, 3, 3], [1.0; 3], GridKind::Probability).unwrap();
        for z in 0..3 {
            for y in 0..3 {
                for x in 0..8 {
                    let i = g.index(x, y, z);
                    g.data_mut()[i] = x as f32 / 7.0;
                }
            }
        }
        let u = upsample_spline2(&g, [16, 3, 3]).unwrap();
        let coeff = spline_coefficients(&g);
        for z in 0..3 {
            for y in 0..3 {
                for x in 0..16 {
                    let tx = (x as f64 + 0.5) * 8.0 / 16.0 - 0.5;
                    let expect = spline2_sample(&coeff, [8, 3, 3], [tx, y as f64, z as f64])
                        .clamp(0.0, 1.0);
                    assert!(
                        (u.get(x, y, z) as f64 - expect).abs() < 1e-6,
                        "({x},{y},{z})"
                    );
                }
            }
        }
    }

    #[test]
    fn prefilter_interpolation_property() {
        // coefficients evaluated at integer knots reproduce the samples
        let samples = [0.0, 1.0, 0.5, 0.25, 0.9, 0.1, 0.0, 0.7];
        let mut line = samples.to_vec();
        prefilter_line(&mut line);
        for (i, &s) in samples.iter().enumerate() {
            let w = spline_weights(0.0);
            let n = samples.len();
            let v = w[0] * line[mirror_index(i as isize - 1, n)]
                + w[1] * line[i]
                + w[2] * line[mirror_index(i as isize + 1, n)];
            assert!((v - s).abs() < 1e-9, "knot {i}: {v} vs {s}");
        }
    }

    #[test]
    fn resample_rejects_zero_target() {
        let g = VoxelGrid::zeros([4, 4, 4], [1.0; 3], GridKind::Mask).unwrap();
        assert!(downsample(&g, [0, 4, 4]).is_err());
        assert!(upsample_spline2(&g, [4, 0, 4]).is_err());
    }
}

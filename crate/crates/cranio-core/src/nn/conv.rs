//! 3D convolution and transposed convolution, forward and exact
//! reverse-mode backward.
//!
//! Cross-correlation semantics with zero ("same") padding of `(k-1)/2`.
//! Stride-s conv output dims are `ceil(n/s)`; the stride-2 transposed
//! convolution is the exact linear-map transpose of the stride-2 conv from
//! doubled dims, so its output dims are `2n`.
//!
//! Weight layout is `(out_ch, in_ch, kz, ky, kx)`, bias `(out_ch,)`.
//! Parallelism is over independent output channels only, so results are
//! bitwise identical regardless of thread count.

use rayon::prelude::*;

use super::tensor::Tensor;

#[inline]
fn wix(oc: usize, ic: usize, kz: usize, ky: usize, kx: usize, in_ch: usize, k: usize) -> usize {
    (((oc * in_ch + ic) * k + kz) * k + ky) * k + kx
}

pub fn conv_out_dims(dims: [usize; 3], stride: usize) -> [usize; 3] {
    dims.map(|n| (n + stride - 1) / stride)
}

/// Strided 3D cross-correlation.
pub fn conv3d_forward(
    x: &Tensor,
    w: &[f64],
    bias: &[f64],
    out_ch: usize,
    k: usize,
    stride: usize,
) -> Tensor {
    assert!(k % 2 == 1, "kernel must be odd");
    let in_ch = x.channels;
    assert_eq!(w.len(), out_ch * in_ch * k * k * k);
    assert_eq!(bias.len(), out_ch);
    let [nx, ny, nz] = x.dims;
    let od = conv_out_dims(x.dims, stride);
    let pad = (k - 1) / 2;
    let mut out = Tensor::zeros(out_ch, od);
    let spatial = od[0] * od[1] * od[2];
    out.data
        .par_chunks_mut(spatial)
        .enumerate()
        .for_each(|(oc, slab)| {
            for oz in 0..od[2] {
                for oy in 0..od[1] {
                    for ox in 0..od[0] {
                        let mut acc = bias[oc];
                        for ic in 0..in_ch {
                            let xc = x.channel(ic);
                            for kz in 0..k {
                                let iz = (oz * stride + kz) as isize - pad as isize;
                                if iz < 0 || iz as usize >= nz {
                                    continue;
                                }
                                for ky in 0..k {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    if iy < 0 || iy as usize >= ny {
                                        continue;
                                    }
                                    let row = (iz as usize * ny + iy as usize) * nx;
                                    for kx in 0..k {
                                        let ix = (ox * stride + kx) as isize - pad as isize;
                                        if ix < 0 || ix as usize >= nx {
                                            continue;
                                        }
                                        acc += xc[row + ix as usize]
                                            * w[wix(oc, ic, kz, ky, kx, in_ch, k)];
                                    }
                                }
                            }
                        }
                        slab[(oz * od[1] + oy) * od[0] + ox] = acc;
                    }
                }
            }
        });
    out
}

/// Exact gradients of [`conv3d_forward`] wrt input, weights and bias.
pub fn conv3d_backward(
    x: &Tensor,
    w: &[f64],
    out_ch: usize,
    k: usize,
    stride: usize,
    upstream: &Tensor,
) -> (Tensor, Vec<f64>, Vec<f64>) {
    let in_ch = x.channels;
    let [nx, ny, nz] = x.dims;
    let od = conv_out_dims(x.dims, stride);
    assert_eq!(upstream.dims, od);
    assert_eq!(upstream.channels, out_ch);
    let pad = (k - 1) / 2;

    let grad_b: Vec<f64> = (0..out_ch)
        .map(|oc| upstream.channel(oc).iter().sum())
        .collect();

    // grad_w: scatter from each upstream voxel into a per-out-channel slab
    let wlen_per_oc = in_ch * k * k * k;
    let mut grad_w = vec![0.0; out_ch * wlen_per_oc];
    grad_w
        .par_chunks_mut(wlen_per_oc)
        .enumerate()
        .for_each(|(oc, gw)| {
            let up = upstream.channel(oc);
            for oz in 0..od[2] {
                for oy in 0..od[1] {
                    for ox in 0..od[0] {
                        let u = up[(oz * od[1] + oy) * od[0] + ox];
                        if u == 0.0 {
                            continue;
                        }
                        for ic in 0..in_ch {
                            let xc = x.channel(ic);
                            for kz in 0..k {
                                let iz = (oz * stride + kz) as isize - pad as isize;
                                if iz < 0 || iz as usize >= nz {
                                    continue;
                                }
                                for ky in 0..k {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    if iy < 0 || iy as usize >= ny {
                                        continue;
                                    }
                                    let row = (iz as usize * ny + iy as usize) * nx;
                                    for kx in 0..k {
                                        let ix = (ox * stride + kx) as isize - pad as isize;
                                        if ix < 0 || ix as usize >= nx {
                                            continue;
                                        }
                                        gw[wix(0, ic, kz, ky, kx, in_ch, k)] +=
                                            u * xc[row + ix as usize];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });

    // grad_x: gather form, parallel over input channels
    let mut grad_x = Tensor::zeros(in_ch, x.dims);
    let spatial = nx * ny * nz;
    grad_x
        .data
        .par_chunks_mut(spatial)
        .enumerate()
        .for_each(|(ic, slab)| {
            for iz in 0..nz {
                for iy in 0..ny {
                    for ix in 0..nx {
                        let mut acc = 0.0;
                        for oc in 0..out_ch {
                            let up = upstream.channel(oc);
                            for kz in 0..k {
                                let t = iz + pad;
                                if t < kz || (t - kz) % stride != 0 {
                                    continue;
                                }
                                let oz = (t - kz) / stride;
                                if oz >= od[2] {
                                    continue;
                                }
                                for ky in 0..k {
                                    let t = iy + pad;
                                    if t < ky || (t - ky) % stride != 0 {
                                        continue;
                                    }
                                    let oy = (t - ky) / stride;
                                    if oy >= od[1] {
                                        continue;
                                    }
                                    for kx in 0..k {
                                        let t = ix + pad;
                                        if t < kx || (t - kx) % stride != 0 {
                                            continue;
                                        }
                                        let ox = (t - kx) / stride;
                                        if ox >= od[0] {
                                            continue;
                                        }
                                        acc += up[(oz * od[1] + oy) * od[0] + ox]
                                            * w[wix(oc, ic, kz, ky, kx, in_ch, k)];
                                    }
                                }
                            }
                        }
                        slab[(iz * ny + iy) * nx + ix] = acc;
                    }
                }
            }
        });

    (grad_x, grad_w, grad_b)
}

/// Stride-2 transposed convolution doubling each spatial dim.
///
/// Defined as the transpose of the stride-2 same-padding conv that maps
/// `2n -> n`: `out[oc][p] = b[oc] + sum over (ic, i, dk) with
/// 2i + dk - pad = p of g[ic][i] * w[oc][ic][dk]`.
pub fn deconv3d_forward(g: &Tensor, w: &[f64], bias: &[f64], out_ch: usize, k: usize) -> Tensor {
    assert!(k % 2 == 1, "kernel must be odd");
    let in_ch = g.channels;
    assert_eq!(w.len(), out_ch * in_ch * k * k * k);
    assert_eq!(bias.len(), out_ch);
    let id = g.dims;
    let od = id.map(|n| 2 * n);
    let pad = (k - 1) / 2;
    let mut out = Tensor::zeros(out_ch, od);
    let spatial = od[0] * od[1] * od[2];
    out.data
        .par_chunks_mut(spatial)
        .enumerate()
        .for_each(|(oc, slab)| {
            for pz in 0..od[2] {
                for py in 0..od[1] {
                    for px in 0..od[0] {
                        let mut acc = bias[oc];
                        for ic in 0..in_ch {
                            let gc = g.channel(ic);
                            for kz in 0..k {
                                let t = pz + pad;
                                if t < kz || (t - kz) % 2 != 0 {
                                    continue;
                                }
                                let iz = (t - kz) / 2;
                                if iz >= id[2] {
                                    continue;
                                }
                                for ky in 0..k {
                                    let t = py + pad;
                                    if t < ky || (t - ky) % 2 != 0 {
                                        continue;
                                    }
                                    let iy = (t - ky) / 2;
                                    if iy >= id[1] {
                                        continue;
                                    }
                                    let row = (iz * id[1] + iy) * id[0];
                                    for kx in 0..k {
                                        let t = px + pad;
                                        if t < kx || (t - kx) % 2 != 0 {
                                            continue;
                                        }
                                        let ix = (t - kx) / 2;
                                        if ix >= id[0] {
                                            continue;
                                        }
                                        acc += gc[row + ix]
                                            * w[wix(oc, ic, kz, ky, kx, in_ch, k)];
                                    }
                                }
                            }
                        }
                        slab[(pz * od[1] + py) * od[0] + px] = acc;
                    }
                }
            }
        });
    out
}

/// Exact gradients of [`deconv3d_forward`].
pub fn deconv3d_backward(
    g: &Tensor,
    w: &[f64],
    out_ch: usize,
    k: usize,
    upstream: &Tensor,
) -> (Tensor, Vec<f64>, Vec<f64>) {
    let in_ch = g.channels;
    let id = g.dims;
    let od = id.map(|n| 2 * n);
    assert_eq!(upstream.dims, od);
    assert_eq!(upstream.channels, out_ch);
    let pad = (k - 1) / 2;

    let grad_b: Vec<f64> = (0..out_ch)
        .map(|oc| upstream.channel(oc).iter().sum())
        .collect();

    // grad wrt g is a stride-2 conv of the upstream with the same weights
    let mut grad_g = Tensor::zeros(in_ch, id);
    let spatial = id[0] * id[1] * id[2];
    grad_g
        .data
        .par_chunks_mut(spatial)
        .enumerate()
        .for_each(|(ic, slab)| {
            for iz in 0..id[2] {
                for iy in 0..id[1] {
                    for ix in 0..id[0] {
                        let mut acc = 0.0;
                        for oc in 0..out_ch {
                            let up = upstream.channel(oc);
                            for kz in 0..k {
                                let pz = (2 * iz + kz) as isize - pad as isize;
                                if pz < 0 || pz as usize >= od[2] {
                                    continue;
                                }
                                for ky in 0..k {
                                    let py = (2 * iy + ky) as isize - pad as isize;
                                    if py < 0 || py as usize >= od[1] {
                                        continue;
                                    }
                                    let row = (pz as usize * od[1] + py as usize) * od[0];
                                    for kx in 0..k {
                                        let px = (2 * ix + kx) as isize - pad as isize;
                                        if px < 0 || px as usize >= od[0] {
                                            continue;
                                        }
                                        acc += up[row + px as usize]
                                            * w[wix(oc, ic, kz, ky, kx, in_ch, k)];
                                    }
                                }
                            }
                        }
                        slab[(iz * id[1] + iy) * id[0] + ix] = acc;
                    }
                }
            }
        });

    let wlen_per_oc = in_ch * k * k * k;
    let mut grad_w = vec![0.0; out_ch * wlen_per_oc];
    grad_w
        .par_chunks_mut(wlen_per_oc)
        .enumerate()
        .for_each(|(oc, gw)| {
            let up = upstream.channel(oc);
            for ic in 0..in_ch {
                let gc = g.channel(ic);
                for iz in 0..id[2] {
                    for iy in 0..id[1] {
                        for ix in 0..id[0] {
                            let gv = gc[(iz * id[1] + iy) * id[0] + ix];
                            if gv == 0.0 {
                                continue;
                            }
                            for kz in 0..k {
                                let pz = (2 * iz + kz) as isize - pad as isize;
                                if pz < 0 || pz as usize >= od[2] {
                                    continue;
                                }
                                for ky in 0..k {
                                    let py = (2 * iy + ky) as isize - pad as isize;
                                    if py < 0 || py as usize >= od[1] {
                                        continue;
                                    }
                                    let row = (pz as usize * od[1] + py as usize) * od[0];
                                    for kx in 0..k {
                                        let px = (2 * ix + kx) as isize - pad as isize;
                                        if px < 0 || px as usize >= od[0] {
                                            continue;
                                        }
                                        gw[wix(0, ic, kz, ky, kx, in_ch, k)] +=
                                            gv * up[row + px as usize];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });

    (grad_g, grad_w, grad_b)
}

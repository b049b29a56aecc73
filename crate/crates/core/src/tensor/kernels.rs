//! Raw forward/backward kernels on flat buffers.
//!
//! These do no shape validation beyond debug assertions; [`super::Graph`]
//! checks shapes before calling in.

use super::Shape;
use crate::parallel;

/// Same-padded, stride-1 cross-correlation of `x` with `weight` plus `bias`.
///
/// `weight` is `[out, in, k, k]`, `k` odd.
pub fn conv2d_forward(x: &[f64], xs: Shape, weight: &[f64], bias: &[f64], out_ch: usize, k: usize) -> Vec<f64> {
    let [b, cin, h, w] = xs.0;
    let plane = h * w;
    let pad = k / 2;
    let mut out = vec![0.0; b * out_ch * plane];
    debug_assert_eq!(weight.len(), out_ch * cin * k * k);

    parallel::for_each_chunk_mut(&mut out, plane, |idx, dst| {
        let (ib, oc) = (idx / out_ch, idx % out_ch);
        dst.fill(bias[oc]);
        for ic in 0..cin {
            let src = &x[(ib * cin + ic) * plane..][..plane];
            let wk = &weight[(oc * cin + ic) * k * k..][..k * k];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = wk[ky * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    shifted_axpy(dst, src, wv, h, w, ky as isize - pad as isize, kx as isize - pad as isize);
                }
            }
        }
    });
    out
}

/// `dst[y, x] += a * src[y + dy, x + dx]` wherever the source index is inside the plane.
#[inline]
fn shifted_axpy(dst: &mut [f64], src: &[f64], a: f64, h: usize, w: usize, dy: isize, dx: isize) {
    let y0 = (-dy).max(0) as usize;
    let y1 = (h as isize - dy).min(h as isize).max(0) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
    if x0 >= x1 {
        return;
    }
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let d = &mut dst[y * w + x0..y * w + x1];
        let s = &src[sy * w + (x0 as isize + dx) as usize..][..x1 - x0];
        for (o, i) in d.iter_mut().zip(s) {
            *o += a * i;
        }
    }
}

/// Gradient of the convolution output with respect to its input.
pub fn conv2d_backward_input(grad_out: &[f64], xs: Shape, weight: &[f64], out_ch: usize, k: usize) -> Vec<f64> {
    let [_, cin, h, w] = xs.0;
    let plane = h * w;
    let pad = k / 2;
    let mut gx = vec![0.0; xs.numel()];
    parallel::for_each_chunk_mut(&mut gx, plane, |idx, dst| {
        let (ib, ic) = (idx / cin, idx % cin);
        for oc in 0..out_ch {
            let g = &grad_out[(ib * out_ch + oc) * plane..][..plane];
            let wk = &weight[(oc * cin + ic) * k * k..][..k * k];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = wk[ky * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    shifted_axpy(dst, g, wv, h, w, pad as isize - ky as isize, pad as isize - kx as isize);
                }
            }
        }
    });
    gx
}

/// Gradients of the convolution output with respect to weight and bias.
pub fn conv2d_backward_params(grad_out: &[f64], x: &[f64], xs: Shape, out_ch: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    let [b, cin, h, w] = xs.0;
    let plane = h * w;
    let pad = k / 2;
    let per_oc = cin * k * k;
    let mut gw = vec![0.0; out_ch * per_oc];
    parallel::for_each_chunk_mut(&mut gw, per_oc, |oc, dst| {
        for ib in 0..b {
            let g = &grad_out[(ib * out_ch + oc) * plane..][..plane];
            for ic in 0..cin {
                let src = &x[(ib * cin + ic) * plane..][..plane];
                for ky in 0..k {
                    for kx in 0..k {
                        let dy = ky as isize - pad as isize;
                        let dx = kx as isize - pad as isize;
                        dst[(ic * k + ky) * k + kx] += shifted_dot(g, src, h, w, dy, dx);
                    }
                }
            }
        }
    });
    let gb = (0..out_ch)
        .map(|oc| {
            (0..b)
                .map(|ib| grad_out[(ib * out_ch + oc) * plane..][..plane].iter().sum::<f64>())
                .sum()
        })
        .collect();
    (gw, gb)
}

/// `sum over y, x of a[y, x] * b[y + dy, x + dx]` for in-range indices.
#[inline]
fn shifted_dot(a: &[f64], b: &[f64], h: usize, w: usize, dy: isize, dx: isize) -> f64 {
    let y0 = (-dy).max(0) as usize;
    let y1 = (h as isize - dy).min(h as isize).max(0) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
    let mut acc = 0.0;
    if x0 >= x1 {
        return acc;
    }
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let ra = &a[y * w + x0..y * w + x1];
        let rb = &b[sy * w + (x0 as isize + dx) as usize..][..x1 - x0];
        acc += ra.iter().zip(rb).map(|(p, q)| p * q).sum::<f64>();
    }
    acc
}

/// Numerically stable softmax of one group of values.
///
/// Subtracting the maximum first makes the result invariant to any shift of
/// the inputs that is itself exact in floating point.
pub fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
}

/// Vector-Jacobian product of softmax: `y * (g - <g, y>)`.
pub fn softmax_backward_in_place(y: &[f64], grad: &mut [f64]) {
    let dot: f64 = y.iter().zip(grad.iter()).map(|(a, b)| a * b).sum();
    for (g, yv) in grad.iter_mut().zip(y) {
        *g = yv * (*g - dot);
    }
}

/// Sub-pixel rearrangement: output `(b, c, h*r + i, w*r + j)` takes input
/// `(b, c*r*r + i*r + j, h, w)`.
pub fn pixel_shuffle(x: &[f64], xs: Shape, r: usize) -> Vec<f64> {
    let [b, c, h, w] = xs.0;
    let oc = c / (r * r);
    let (oh, ow) = (h * r, w * r);
    let mut out = vec![0.0; x.len()];
    for ib in 0..b {
        for ic in 0..oc {
            for y in 0..h {
                for i in 0..r {
                    for xx in 0..w {
                        for j in 0..r {
                            let src = ((ib * c + ic * r * r + i * r + j) * h + y) * w + xx;
                            let dst = ((ib * oc + ic) * oh + y * r + i) * ow + xx * r + j;
                            out[dst] = x[src];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle(x: &[f64], xs: Shape, r: usize) -> Vec<f64> {
    let [b, c, h, w] = xs.0;
    let (ih, iw) = (h / r, w / r);
    let ic = c * r * r;
    let mut out = vec![0.0; x.len()];
    for ib in 0..b {
        for cc in 0..c {
            for y in 0..ih {
                for i in 0..r {
                    for xx in 0..iw {
                        for j in 0..r {
                            let dst = ((ib * ic + cc * r * r + i * r + j) * ih + y) * iw + xx;
                            let src = ((ib * c + cc) * h + y * r + i) * w + xx * r + j;
                            out[dst] = x[src];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Flat offset into a tensor of shape `src` for an index of the broadcast
/// shape, collapsing broadcast axes to 0.
#[inline]
pub(crate) fn broadcast_offset(idx: [usize; 4], src: Shape) -> usize {
    let s = src.strides();
    let mut o = 0;
    for axis in 0..4 {
        if src.0[axis] != 1 {
            o += idx[axis] * s[axis];
        }
    }
    o
}

/// Sums `grad` (of shape `out`) down to shape `target` along broadcast axes.
pub(crate) fn reduce_to(grad: &[f64], out: Shape, target: Shape) -> Vec<f64> {
    if out == target {
        return grad.to_vec();
    }
    let mut acc = vec![0.0; target.numel()];
    let [b, c, h, w] = out.0;
    let mut i = 0;
    for ib in 0..b {
        for ic in 0..c {
            for ih in 0..h {
                for iw in 0..w {
                    acc[broadcast_offset([ib, ic, ih, iw], target)] += grad[i];
                    i += 1;
                }
            }
        }
    }
    acc
}

/// Applies `f(a, b)` elementwise over the broadcast of two shapes.
pub(crate) fn broadcast_zip(a: &[f64], sa: Shape, b: &[f64], sb: Shape, out: Shape, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    if sa == out && sb == out {
        return a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect();
    }
    let [nb, nc, nh, nw] = out.0;
    let mut v = Vec::with_capacity(out.numel());
    for ib in 0..nb {
        for ic in 0..nc {
            for ih in 0..nh {
                for iw in 0..nw {
                    let idx = [ib, ic, ih, iw];
                    v.push(f(a[broadcast_offset(idx, sa)], b[broadcast_offset(idx, sb)]));
                }
            }
        }
    }
    v
}

//! Layer primitives shared by the forward and backward passes.
//!
//! Convolutions are 3x3, stride 1, same padding, lowered to GEMM via im2col.
//! Batch items are processed in parallel; every cross-sample reduction is
//! accumulated over a fixed chunking of the batch so results do not depend
//! on the worker-thread count.

use rayon::prelude::*;

use super::tensor::Scalar;

/// Fixed number of accumulation chunks for batch reductions.
const ACC_CHUNKS: usize = 8;

pub const K: usize = 3;
const PAD: isize = 1;

/// Lowers one sample `[C, H, W]` into a column matrix `[(C*9), (H*W)]`.
pub fn im2col<T: Scalar>(x: &[T], c_in: usize, h: usize, w: usize, col: &mut [T]) {
    let n = h * w;
    debug_assert_eq!(x.len(), c_in * n);
    debug_assert_eq!(col.len(), c_in * K * K * n);
    for c in 0..c_in {
        let plane = &x[c * n..(c + 1) * n];
        for ky in 0..K {
            for kx in 0..K {
                let row = ((c * K + ky) * K + kx) * n;
                let dy = ky as isize - PAD;
                let dx = kx as isize - PAD;
                for y in 0..h {
                    let sy = y as isize + dy;
                    let dst = &mut col[row + y * w..row + (y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src_row = &plane[(sy as usize) * w..(sy as usize + 1) * w];
                    for (x_out, d) in dst.iter_mut().enumerate() {
                        let sx = x_out as isize + dx;
                        *d = if sx < 0 || sx >= w as isize {
                            T::zero()
                        } else {
                            src_row[sx as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Transpose of [`im2col`]: scatter-adds a column matrix back into `[C, H, W]`.
pub fn col2im_add<T: Scalar>(col: &[T], c_in: usize, h: usize, w: usize, out: &mut [T]) {
    let n = h * w;
    debug_assert_eq!(out.len(), c_in * n);
    for c in 0..c_in {
        let plane = &mut out[c * n..(c + 1) * n];
        for ky in 0..K {
            for kx in 0..K {
                let row = ((c * K + ky) * K + kx) * n;
                let dy = ky as isize - PAD;
                let dx = kx as isize - PAD;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &col[row + y * w..row + (y + 1) * w];
                    let dst_row = &mut plane[(sy as usize) * w..(sy as usize + 1) * w];
                    for (x_out, &v) in src.iter().enumerate() {
                        let sx = x_out as isize + dx;
                        if sx >= 0 && sx < w as isize {
                            dst_row[sx as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Batched conv forward. `x` is `[B, C_in, H, W]`, `weight` `[C_out, C_in*9]`
/// (the natural row-major view of `[C_out, C_in, 3, 3]`), result
/// `[B, C_out, H, W]` with bias added.
#[allow(clippy::too_many_arguments)]
pub fn conv_forward<T: Scalar>(
    x: &[T],
    batch: usize,
    c_in: usize,
    h: usize,
    w: usize,
    weight: &[T],
    bias: &[T],
    c_out: usize,
) -> Vec<T> {
    let n = h * w;
    let kdim = c_in * K * K;
    let mut out = vec![T::zero(); batch * c_out * n];
    out.par_chunks_mut(c_out * n)
        .enumerate()
        .for_each_init(
            || vec![T::zero(); kdim * n],
            |col, (b, out_b)| {
                im2col(&x[b * c_in * n..(b + 1) * c_in * n], c_in, h, w, col);
                T::gemm(c_out, kdim, n, weight, col, T::zero(), out_b);
                for (co, row) in out_b.chunks_mut(n).enumerate() {
                    let bv = bias[co];
                    for v in row {
                        *v += bv;
                    }
                }
            },
        );
    out
}

/// Batched conv backward: returns (d_x, d_weight, d_bias).
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<T: Scalar>(
    x: &[T],
    d_out: &[T],
    batch: usize,
    c_in: usize,
    h: usize,
    w: usize,
    weight: &[T],
    c_out: usize,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let n = h * w;
    let kdim = c_in * K * K;

    // d_x per sample: col gradient = W^T (kdim x c_out) * dY (c_out x n).
    let mut d_x = vec![T::zero(); batch * c_in * n];
    d_x.par_chunks_mut(c_in * n)
        .enumerate()
        .for_each_init(
            || vec![T::zero(); kdim * n],
            |d_col, (b, d_x_b)| {
                let d_out_b = &d_out[b * c_out * n..(b + 1) * c_out * n];
                T::gemm_strided(
                    kdim,
                    c_out,
                    n,
                    weight,
                    1,
                    kdim as isize,
                    d_out_b,
                    n as isize,
                    1,
                    T::zero(),
                    d_col,
                );
                col2im_add(d_col, c_in, h, w, d_x_b);
            },
        );

    // d_w and d_b: fixed chunking of the batch, partials summed in order.
    let chunk = batch.div_ceil(ACC_CHUNKS);
    let partials: Vec<(Vec<T>, Vec<T>)> = (0..batch)
        .collect::<Vec<_>>()
        .par_chunks(chunk)
        .map(|samples| {
            let mut col = vec![T::zero(); kdim * n];
            let mut d_w = vec![T::zero(); c_out * kdim];
            let mut d_b = vec![T::zero(); c_out];
            for &b in samples {
                im2col(&x[b * c_in * n..(b + 1) * c_in * n], c_in, h, w, &mut col);
                let d_out_b = &d_out[b * c_out * n..(b + 1) * c_out * n];
                // dW += dY (c_out x n) * col^T (n x kdim)
                T::gemm_strided(
                    c_out,
                    n,
                    kdim,
                    d_out_b,
                    n as isize,
                    1,
                    &col,
                    1,
                    n as isize,
                    T::one(),
                    &mut d_w,
                );
                for (co, row) in d_out_b.chunks(n).enumerate() {
                    let mut acc = T::zero();
                    for &v in row {
                        acc += v;
                    }
                    d_b[co] += acc;
                }
            }
            (d_w, d_b)
        })
        .collect();

    let mut d_w = vec![T::zero(); c_out * kdim];
    let mut d_b = vec![T::zero(); c_out];
    for (pw, pb) in partials {
        for (a, b) in d_w.iter_mut().zip(pw) {
            *a += b;
        }
        for (a, b) in d_b.iter_mut().zip(pb) {
            *a += b;
        }
    }
    (d_x, d_w, d_b)
}

/// Per-channel batch statistics over `[B, C, S]`.
pub struct BnStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub invstd: Vec<T>,
}

pub fn bn_batch_stats<T: Scalar>(x: &[T], batch: usize, channels: usize, s: usize, eps: T) -> BnStats<T> {
    let count = T::from_count(batch * s);
    let stats: Vec<(T, T)> = (0..channels)
        .into_par_iter()
        .map(|c| {
            let mut sum = T::zero();
            let mut sq = T::zero();
            for b in 0..batch {
                let base = (b * channels + c) * s;
                for &v in &x[base..base + s] {
                    sum += v;
                    sq += v * v;
                }
            }
            let mean = sum / count;
            let var = sq / count - mean * mean;
            // guard tiny negative from cancellation
            (mean, if var < T::zero() { T::zero() } else { var })
        })
        .collect();
    let mean: Vec<T> = stats.iter().map(|s| s.0).collect();
    let var: Vec<T> = stats.iter().map(|s| s.1).collect();
    let invstd = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    BnStats { mean, var, invstd }
}

/// Normalizes with given statistics: returns (y, x_hat).
#[allow(clippy::too_many_arguments)]
pub fn bn_apply<T: Scalar>(
    x: &[T],
    batch: usize,
    channels: usize,
    s: usize,
    mean: &[T],
    invstd: &[T],
    gamma: &[T],
    beta: &[T],
) -> (Vec<T>, Vec<T>) {
    let mut y = vec![T::zero(); x.len()];
    let mut x_hat = vec![T::zero(); x.len()];
    let _ = batch;
    y.par_chunks_mut(s)
        .zip(x_hat.par_chunks_mut(s))
        .enumerate()
        .for_each(|(idx, (y_row, xh_row))| {
            let c = idx % channels;
            let (m, is, g, be) = (mean[c], invstd[c], gamma[c], beta[c]);
            let base = idx * s;
            for i in 0..s {
                let xh = (x[base + i] - m) * is;
                xh_row[i] = xh;
                y_row[i] = g * xh + be;
            }
        });
    (y, x_hat)
}

/// Train-mode batch-norm backward. Returns (d_x, d_gamma, d_beta).
pub fn bn_backward<T: Scalar>(
    d_y: &[T],
    x_hat: &[T],
    batch: usize,
    channels: usize,
    s: usize,
    gamma: &[T],
    invstd: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let count = T::from_count(batch * s);
    // per-channel sums of d_y and d_y * x_hat
    let sums: Vec<(T, T)> = (0..channels)
        .into_par_iter()
        .map(|c| {
            let mut s1 = T::zero();
            let mut s2 = T::zero();
            for b in 0..batch {
                let base = (b * channels + c) * s;
                for i in 0..s {
                    let dy = d_y[base + i];
                    s1 += dy;
                    s2 += dy * x_hat[base + i];
                }
            }
            (s1, s2)
        })
        .collect();
    let d_gamma: Vec<T> = sums.iter().map(|s| s.1).collect();
    let d_beta: Vec<T> = sums.iter().map(|s| s.0).collect();

    let mut d_x = vec![T::zero(); d_y.len()];
    d_x.par_chunks_mut(s).enumerate().for_each(|(idx, row)| {
        let c = idx % channels;
        let (g, is) = (gamma[c], invstd[c]);
        let (s1, s2) = sums[c];
        let base = idx * s;
        for (i, r) in row.iter_mut().enumerate() {
            let dy = d_y[base + i];
            *r = g * is * (dy - s1 / count - x_hat[base + i] * s2 / count);
        }
    });
    (d_x, d_gamma, d_beta)
}

/// Infer-mode batch norm using running statistics.
#[allow(clippy::too_many_arguments)]
pub fn bn_infer<T: Scalar>(
    x: &[T],
    channels: usize,
    s: usize,
    run_mean: &[T],
    run_var: &[T],
    gamma: &[T],
    beta: &[T],
    eps: T,
) -> Vec<T> {
    let mut y = vec![T::zero(); x.len()];
    y.par_chunks_mut(s).enumerate().for_each(|(idx, row)| {
        let c = idx % channels;
        let is = T::one() / (run_var[c] + eps).sqrt();
        let (m, g, be) = (run_mean[c], gamma[c], beta[c]);
        let base = idx * s;
        for (i, r) in row.iter_mut().enumerate() {
            *r = g * (x[base + i] - m) * is + be;
        }
    });
    y
}

pub fn relu_forward<T: Scalar>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// ReLU backward using the forward output as the mask source.
pub fn relu_backward<T: Scalar>(d_y: &mut [T], y: &[T]) {
    for (d, &v) in d_y.iter_mut().zip(y) {
        if v <= T::zero() {
            *d = T::zero();
        }
    }
}

/// 2x2 average pooling, stride 2. H and W must be even.
pub fn avgpool2_forward<T: Scalar>(x: &[T], planes: usize, h: usize, w: usize) -> Vec<T> {
    assert!(h.is_multiple_of(2) && w.is_multiple_of(2), "avg pool needs even dims");
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::from_f64(0.25);
    let mut out = vec![T::zero(); planes * oh * ow];
    out.par_chunks_mut(oh * ow).enumerate().for_each(|(p, plane)| {
        let src = &x[p * h * w..(p + 1) * h * w];
        for y in 0..oh {
            for x_o in 0..ow {
                let a = src[(2 * y) * w + 2 * x_o];
                let b = src[(2 * y) * w + 2 * x_o + 1];
                let c = src[(2 * y + 1) * w + 2 * x_o];
                let d = src[(2 * y + 1) * w + 2 * x_o + 1];
                plane[y * ow + x_o] = (a + b + c + d) * quarter;
            }
        }
    });
    out
}

pub fn avgpool2_backward<T: Scalar>(d_out: &[T], planes: usize, h: usize, w: usize) -> Vec<T> {
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::from_f64(0.25);
    let mut d_x = vec![T::zero(); planes * h * w];
    d_x.par_chunks_mut(h * w).enumerate().for_each(|(p, plane)| {
        let src = &d_out[p * oh * ow..(p + 1) * oh * ow];
        for y in 0..oh {
            for x_o in 0..ow {
                let g = src[y * ow + x_o] * quarter;
                plane[(2 * y) * w + 2 * x_o] = g;
                plane[(2 * y) * w + 2 * x_o + 1] = g;
                plane[(2 * y + 1) * w + 2 * x_o] = g;
                plane[(2 * y + 1) * w + 2 * x_o + 1] = g;
            }
        }
    });
    d_x
}

/// Global average pooling `[B, C, S] -> [B, C]`.
pub fn gap_forward<T: Scalar>(x: &[T], planes: usize, s: usize) -> Vec<T> {
    let inv = T::one() / T::from_count(s);
    (0..planes)
        .map(|p| {
            let mut acc = T::zero();
            for &v in &x[p * s..(p + 1) * s] {
                acc += v;
            }
            acc * inv
        })
        .collect()
}

pub fn gap_backward<T: Scalar>(d_out: &[T], planes: usize, s: usize) -> Vec<T> {
    let inv = T::one() / T::from_count(s);
    let mut d_x = vec![T::zero(); planes * s];
    for p in 0..planes {
        let g = d_out[p] * inv;
        d_x[p * s..(p + 1) * s].fill(g);
    }
    d_x
}

/// Inverted-dropout mask: 0 with probability `rate`, else `1/(1-rate)`.
pub fn dropout_mask<T: Scalar, R: rand::Rng>(len: usize, rate: f32, rng: &mut R) -> Vec<T> {
    debug_assert!((0.0..1.0).contains(&rate));
    let keep_scale = T::from_f64(1.0 / (1.0 - f64::from(rate)));
    (0..len)
        .map(|_| {
            if rng.random::<f32>() < rate {
                T::zero()
            } else {
                keep_scale
            }
        })
        .collect()
}

pub fn apply_mask<T: Scalar>(x: &mut [T], mask: &[T]) {
    for (v, &m) in x.iter_mut().zip(mask) {
        *v *= m;
    }
}

/// FC forward: `[B, F_in] x W^T -> [B, F_out]`, bias added.
pub fn fc_forward<T: Scalar>(
    x: &[T],
    batch: usize,
    f_in: usize,
    weight: &[T],
    bias: &[T],
    f_out: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); batch * f_out];
    T::gemm_strided(
        batch,
        f_in,
        f_out,
        x,
        f_in as isize,
        1,
        weight,
        1,
        f_in as isize,
        T::zero(),
        &mut out,
    );
    for row in out.chunks_mut(f_out) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
    out
}

/// FC backward: returns (d_x, d_weight, d_bias).
pub fn fc_backward<T: Scalar>(
    x: &[T],
    d_out: &[T],
    batch: usize,
    f_in: usize,
    weight: &[T],
    f_out: usize,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    // dW (f_out x f_in) = dY^T (f_out x B) * X (B x f_in)
    let mut d_w = vec![T::zero(); f_out * f_in];
    T::gemm_strided(
        f_out,
        batch,
        f_in,
        d_out,
        1,
        f_out as isize,
        x,
        f_in as isize,
        1,
        T::zero(),
        &mut d_w,
    );
    let mut d_b = vec![T::zero(); f_out];
    for row in d_out.chunks(f_out) {
        for (acc, &v) in d_b.iter_mut().zip(row) {
            *acc += v;
        }
    }
    // dX (B x f_in) = dY (B x f_out) * W (f_out x f_in)
    let mut d_x = vec![T::zero(); batch * f_in];
    T::gemm_strided(
        batch,
        f_out,
        f_in,
        d_out,
        f_out as isize,
        1,
        weight,
        f_in as isize,
        1,
        T::zero(),
        &mut d_x,
    );
    (d_x, d_w, d_b)
}

/// Row-wise stable softmax in place.
pub fn softmax_rows<T: Scalar>(x: &mut [T], cols: usize) {
    for row in x.chunks_mut(cols) {
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row {
            *v /= sum;
        }
    }
}

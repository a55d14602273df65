//! Batched layer kernels over `[batch][channel][time]` row-major buffers.

use alloc::vec::Vec;

use super::config::{BnSlots, ConvSlots, FcSlots};
use crate::math;

pub const BN_EPS: f64 = 1e-5;

#[inline]
fn valid_range(k: usize, pad: usize, stride: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    // 0 <= t*stride + k - pad < in_len
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    let hi = if in_len + pad > k {
        ((in_len - 1 + pad - k) / stride + 1).min(out_len)
    } else {
        0
    };
    (lo, hi.max(lo))
}

pub fn conv_forward(
    params: &[f64],
    s: &ConvSlots,
    input: &[f64],
    batch: usize,
    in_len: usize,
    out_len: usize,
    out: &mut Vec<f64>,
) {
    let (w, b) = (&params[s.w.clone()], &params[s.b.clone()]);
    out.clear();
    out.resize(batch * s.out_ch * out_len, 0.0);
    for n in 0..batch {
        let x = &input[n * s.in_ch * in_len..(n + 1) * s.in_ch * in_len];
        let y = &mut out[n * s.out_ch * out_len..(n + 1) * s.out_ch * out_len];
        for oc in 0..s.out_ch {
            let row = &mut y[oc * out_len..(oc + 1) * out_len];
            row.iter_mut().for_each(|v| *v = b[oc]);
            for ic in 0..s.in_ch {
                let xr = &x[ic * in_len..(ic + 1) * in_len];
                let wr = &w[(oc * s.in_ch + ic) * s.kernel..(oc * s.in_ch + ic + 1) * s.kernel];
                for (k, &wv) in wr.iter().enumerate() {
                    let (lo, hi) = valid_range(k, s.pad, s.stride, in_len, out_len);
                    if s.stride == 1 {
                        let base = lo + k - s.pad;
                        let src = &xr[base..base + (hi - lo)];
                        for (o, &xv) in row[lo..hi].iter_mut().zip(src) {
                            *o += wv * xv;
                        }
                    } else {
                        for (t, o) in row.iter_mut().enumerate().take(hi).skip(lo) {
                            *o += wv * xr[t * s.stride + k - s.pad];
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates weight/bias gradients into `grad` and, when `d_input` is
/// given, writes the input gradient.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward(
    params: &[f64],
    s: &ConvSlots,
    input: &[f64],
    d_out: &[f64],
    batch: usize,
    in_len: usize,
    out_len: usize,
    grad: &mut [f64],
    mut d_input: Option<&mut Vec<f64>>,
) {
    let w = &params[s.w.clone()];
    if let Some(d) = d_input.as_deref_mut() {
        d.clear();
        d.resize(batch * s.in_ch * in_len, 0.0);
    }
    let mut gw = alloc::vec![0.0; s.w.len()];
    let mut gb = alloc::vec![0.0; s.b.len()];
    for n in 0..batch {
        let x = &input[n * s.in_ch * in_len..(n + 1) * s.in_ch * in_len];
        let dy = &d_out[n * s.out_ch * out_len..(n + 1) * s.out_ch * out_len];
        for oc in 0..s.out_ch {
            let dr = &dy[oc * out_len..(oc + 1) * out_len];
            gb[oc] += dr.iter().sum::<f64>();
            for ic in 0..s.in_ch {
                let xr = &x[ic * in_len..(ic + 1) * in_len];
                let wi = (oc * s.in_ch + ic) * s.kernel;
                for k in 0..s.kernel {
                    let (lo, hi) = valid_range(k, s.pad, s.stride, in_len, out_len);
                    let mut acc = 0.0;
                    if s.stride == 1 {
                        let base = lo + k - s.pad;
                        for (&g, &xv) in dr[lo..hi].iter().zip(&xr[base..base + (hi - lo)]) {
                            acc += g * xv;
                        }
                    } else {
                        for t in lo..hi {
                            acc += dr[t] * xr[t * s.stride + k - s.pad];
                        }
                    }
                    gw[wi + k] += acc;
                }
            }
        }
        if let Some(d) = d_input.as_deref_mut() {
            let dx = &mut d[n * s.in_ch * in_len..(n + 1) * s.in_ch * in_len];
            for oc in 0..s.out_ch {
                let dr = &dy[oc * out_len..(oc + 1) * out_len];
                for ic in 0..s.in_ch {
                    let dxr = &mut dx[ic * in_len..(ic + 1) * in_len];
                    let wi = (oc * s.in_ch + ic) * s.kernel;
                    for k in 0..s.kernel {
                        let wv = w[wi + k];
                        let (lo, hi) = valid_range(k, s.pad, s.stride, in_len, out_len);
                        if s.stride == 1 {
                            let base = lo + k - s.pad;
                            for (o, &g) in dxr[base..base + (hi - lo)].iter_mut().zip(&dr[lo..hi]) {
                                *o += wv * g;
                            }
                        } else {
                            for t in lo..hi {
                                dxr[t * s.stride + k - s.pad] += wv * dr[t];
                            }
                        }
                    }
                }
            }
        }
    }
    for (g, v) in grad[s.w.clone()].iter_mut().zip(gw) {
        *g += v;
    }
    for (g, v) in grad[s.b.clone()].iter_mut().zip(gb) {
        *g += v;
    }
}

/// Per-channel state kept from a training-mode batch-norm pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BnCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    /// Unbiased batch variance, used for the running estimate.
    pub var_unbiased: Vec<f64>,
}

pub fn bn_forward_train(
    params: &[f64],
    s: &BnSlots,
    x: &mut [f64],
    batch: usize,
    ch: usize,
    len: usize,
) -> BnCache {
    let (gamma, beta) = (&params[s.gamma.clone()], &params[s.beta.clone()]);
    let count = (batch * len) as f64;
    let mut mean = alloc::vec![0.0; ch];
    let mut var = alloc::vec![0.0; ch];
    for n in 0..batch {
        for c in 0..ch {
            let row = &x[(n * ch + c) * len..(n * ch + c + 1) * len];
            mean[c] += row.iter().sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    for n in 0..batch {
        for c in 0..ch {
            let row = &x[(n * ch + c) * len..(n * ch + c + 1) * len];
            let m = mean[c];
            var[c] += row.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        }
    }
    let var_unbiased: Vec<f64> = var
        .iter()
        .map(|v| if count > 1.0 { v / (count - 1.0) } else { 0.0 })
        .collect();
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / math::sqrt(v / count + BN_EPS)).collect();
    let mut xhat = alloc::vec![0.0; x.len()];
    for n in 0..batch {
        for c in 0..ch {
            let o = (n * ch + c) * len;
            let (m, is, g, b) = (mean[c], inv_std[c], gamma[c], beta[c]);
            for (v, h) in x[o..o + len].iter_mut().zip(&mut xhat[o..o + len]) {
                *h = (*v - m) * is;
                *v = g * *h + b;
            }
        }
    }
    BnCache {
        xhat,
        inv_std,
        mean,
        var_unbiased,
    }
}

pub fn bn_forward_eval(
    params: &[f64],
    running: &[f64],
    s: &BnSlots,
    x: &mut [f64],
    batch: usize,
    ch: usize,
    len: usize,
) {
    let (gamma, beta) = (&params[s.gamma.clone()], &params[s.beta.clone()]);
    let (rm, rv) = (&running[s.mean.clone()], &running[s.var.clone()]);
    for n in 0..batch {
        for c in 0..ch {
            let is = 1.0 / math::sqrt(rv[c] + BN_EPS);
            let (scale, shift) = (gamma[c] * is, beta[c] - gamma[c] * is * rm[c]);
            let o = (n * ch + c) * len;
            x[o..o + len].iter_mut().for_each(|v| *v = scale * *v + shift);
        }
    }
}

/// Batch-statistics backward pass; overwrites `dy` with the input gradient.
#[allow(clippy::too_many_arguments)]
pub fn bn_backward(
    params: &[f64],
    s: &BnSlots,
    cache: &BnCache,
    dy: &mut [f64],
    batch: usize,
    ch: usize,
    len: usize,
    grad: &mut [f64],
) {
    let gamma = &params[s.gamma.clone()];
    let count = (batch * len) as f64;
    let mut sum_dy = alloc::vec![0.0; ch];
    let mut sum_dy_xhat = alloc::vec![0.0; ch];
    for n in 0..batch {
        for c in 0..ch {
            let o = (n * ch + c) * len;
            for (d, h) in dy[o..o + len].iter().zip(&cache.xhat[o..o + len]) {
                sum_dy[c] += d;
                sum_dy_xhat[c] += d * h;
            }
        }
    }
    for c in 0..ch {
        grad[s.gamma.start + c] += sum_dy_xhat[c];
        grad[s.beta.start + c] += sum_dy[c];
    }
    for n in 0..batch {
        for c in 0..ch {
            let o = (n * ch + c) * len;
            let k = gamma[c] * cache.inv_std[c] / count;
            let (sd, sdx) = (sum_dy[c], sum_dy_xhat[c]);
            for (d, h) in dy[o..o + len].iter_mut().zip(&cache.xhat[o..o + len]) {
                *d = k * (count * *d - sd - h * sdx);
            }
        }
    }
}

pub fn relu_inplace(x: &mut [f64]) {
    x.iter_mut().for_each(|v| {
        if *v < 0.0 {
            *v = 0.0
        }
    });
}

/// Zeroes gradient where the ReLU output was not positive.
pub fn relu_backward(out: &[f64], d: &mut [f64]) {
    for (g, &o) in d.iter_mut().zip(out) {
        if o <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Non-overlapping max pool (trailing remainder dropped). Returns argmax
/// positions within each input row.
pub fn maxpool_forward(
    x: &[f64],
    rows: usize,
    in_len: usize,
    factor: usize,
    out: &mut Vec<f64>,
    want_idx: bool,
) -> Vec<u32> {
    let out_len = in_len / factor;
    out.clear();
    out.resize(rows * out_len, 0.0);
    let mut idx = if want_idx {
        alloc::vec![0u32; rows * out_len]
    } else {
        Vec::new()
    };
    for r in 0..rows {
        let row = &x[r * in_len..(r + 1) * in_len];
        for t in 0..out_len {
            let win = &row[t * factor..(t + 1) * factor];
            let mut best = 0;
            for (j, &v) in win.iter().enumerate().skip(1) {
                if v > win[best] {
                    best = j;
                }
            }
            out[r * out_len + t] = win[best];
            if want_idx {
                idx[r * out_len + t] = (t * factor + best) as u32;
            }
        }
    }
    idx
}

pub fn maxpool_backward(d_out: &[f64], idx: &[u32], rows: usize, in_len: usize, out_len: usize) -> Vec<f64> {
    let mut d = alloc::vec![0.0; rows * in_len];
    for r in 0..rows {
        for t in 0..out_len {
            d[r * in_len + idx[r * out_len + t] as usize] += d_out[r * out_len + t];
        }
    }
    d
}

pub fn fc_forward(params: &[f64], s: &FcSlots, x: &[f64], batch: usize, out: &mut Vec<f64>) {
    let (w, b) = (&params[s.w.clone()], &params[s.b.clone()]);
    out.clear();
    out.resize(batch * s.outputs, 0.0);
    for n in 0..batch {
        let xr = &x[n * s.inputs..(n + 1) * s.inputs];
        for j in 0..s.outputs {
            let wr = &w[j * s.inputs..(j + 1) * s.inputs];
            out[n * s.outputs + j] = b[j] + wr.iter().zip(xr).map(|(a, c)| a * c).sum::<f64>();
        }
    }
}

pub fn fc_backward(
    params: &[f64],
    s: &FcSlots,
    x: &[f64],
    d_out: &[f64],
    batch: usize,
    grad: &mut [f64],
) -> Vec<f64> {
    let w = &params[s.w.clone()];
    let mut dx = alloc::vec![0.0; batch * s.inputs];
    for n in 0..batch {
        let xr = &x[n * s.inputs..(n + 1) * s.inputs];
        let dxr = &mut dx[n * s.inputs..(n + 1) * s.inputs];
        for j in 0..s.outputs {
            let g = d_out[n * s.outputs + j];
            grad[s.b.start + j] += g;
            let gw = &mut grad[s.w.start + j * s.inputs..s.w.start + (j + 1) * s.inputs];
            for (a, &xv) in gw.iter_mut().zip(xr) {
                *a += g * xv;
            }
            let wr = &w[j * s.inputs..(j + 1) * s.inputs];
            for (a, &wv) in dxr.iter_mut().zip(wr) {
                *a += g * wv;
            }
        }
    }
    dx
}

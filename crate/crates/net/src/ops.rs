//! Forward and backward kernels for every layer kind.
//!
//! All spatial ops use NCHW layout, square kernels and windows, and the
//! cross-correlation convention (no kernel flip). Backward kernels take the
//! forward input (and output where cheaper) plus the upstream gradient and
//! return gradients for the input and every parameter.

use crate::error::{shape_err, NetError, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Probabilities below this are clamped before taking the log in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Elu,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    Max,
    Avg,
}

impl std::fmt::Display for PoolMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PoolMode::Max => "max",
            PoolMode::Avg => "avg",
        })
    }
}

impl std::str::FromStr for PoolMode {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(PoolMode::Max),
            "avg" => Ok(PoolMode::Avg),
            other => Err(NetError::InvalidConfig(format!("unknown pooling mode {other:?}"))),
        }
    }
}

/// Output extent along one axis: `floor((n + 2p - k) / s) + 1`.
pub fn conv_out_len(n: usize, k: usize, stride: usize, padding: usize) -> Result<usize> {
    if k == 0 || stride == 0 {
        return shape_err("kernel and stride must be at least 1");
    }
    if n + 2 * padding < k {
        return shape_err(format!(
            "extent {n} with padding {padding} is smaller than kernel {k}"
        ));
    }
    Ok((n + 2 * padding - k) / stride + 1)
}

// Output positions `o` with `0 <= o*s + off - p < n_in`.
fn valid_range(off: usize, pad: usize, stride: usize, n_in: usize, n_out: usize) -> (usize, usize) {
    let lo = if off >= pad {
        0
    } else {
        (pad - off).div_ceil(stride)
    };
    if n_in + pad <= off {
        return (0, 0);
    }
    let hi = ((n_in - 1 + pad - off) / stride + 1).min(n_out);
    (lo.min(hi), hi)
}

#[derive(Clone, Copy)]
struct PlaneGeom {
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

// out += corr(x, kern)
fn corr_plane_fwd(g: PlaneGeom, x: &[f64], kern: &[f64], out: &mut [f64]) {
    for ky in 0..g.k {
        let (oy0, oy1) = valid_range(ky, g.pad, g.stride, g.h, g.oh);
        for kx in 0..g.k {
            let wv = kern[ky * g.k + kx];
            let (ox0, ox1) = valid_range(kx, g.pad, g.stride, g.w, g.ow);
            if ox0 >= ox1 {
                continue;
            }
            for oy in oy0..oy1 {
                let iy = oy * g.stride + ky - g.pad;
                let xrow = &x[iy * g.w..(iy + 1) * g.w];
                let orow = &mut out[oy * g.ow + ox0..oy * g.ow + ox1];
                if g.stride == 1 {
                    let ix0 = ox0 + kx - g.pad;
                    for (o, xv) in orow.iter_mut().zip(&xrow[ix0..]) {
                        *o += wv * xv;
                    }
                } else {
                    for (j, o) in orow.iter_mut().enumerate() {
                        *o += wv * xrow[(ox0 + j) * g.stride + kx - g.pad];
                    }
                }
            }
        }
    }
}

// gx += corr^T(grad, kern); gk += corr(x, grad)
fn corr_plane_bwd(
    g: PlaneGeom,
    x: &[f64],
    kern: &[f64],
    grad: &[f64],
    gx: &mut [f64],
    gk: &mut [f64],
) {
    for ky in 0..g.k {
        let (oy0, oy1) = valid_range(ky, g.pad, g.stride, g.h, g.oh);
        for kx in 0..g.k {
            let wv = kern[ky * g.k + kx];
            let (ox0, ox1) = valid_range(kx, g.pad, g.stride, g.w, g.ow);
            if ox0 >= ox1 {
                continue;
            }
            let mut acc = 0.0;
            for oy in oy0..oy1 {
                let iy = oy * g.stride + ky - g.pad;
                let grow = &grad[oy * g.ow + ox0..oy * g.ow + ox1];
                let row = iy * g.w;
                for (j, gv) in grow.iter().enumerate() {
                    let ix = row + (ox0 + j) * g.stride + kx - g.pad;
                    acc += gv * x[ix];
                    gx[ix] += gv * wv;
                }
            }
            gk[ky * g.k + kx] += acc;
        }
    }
}

fn check_bias(bias: Option<&Tensor>, n: usize, what: &str) -> Result<()> {
    if let Some(b) = bias {
        if b.shape() != [n] {
            return shape_err(format!("{what} bias must be [{n}], got {:?}", b.shape()));
        }
    }
    Ok(())
}

fn square_kernel(kernel: &Tensor) -> Result<(usize, usize, usize)> {
    let (co, ci, kh, kw) = kernel.dims4()?;
    if kh != kw {
        return shape_err(format!("only square kernels are supported, got {kh}x{kw}"));
    }
    Ok((co, ci, kh))
}

/// Gradients returned by the parameterized backward kernels.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

/// Standard 2-D convolution. `kernel` is `[Cout, Cin, k, k]`.
pub fn conv2d(
    input: &Tensor,
    kernel: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let (n, cin, h, w) = input.dims4()?;
    let (cout, kcin, k) = square_kernel(kernel)?;
    if kcin != cin {
        return shape_err(format!("conv2d expects {kcin} input channels, got {cin}"));
    }
    check_bias(bias, cout, "conv2d")?;
    let oh = conv_out_len(h, k, stride, padding)?;
    let ow = conv_out_len(w, k, stride, padding)?;
    let g = PlaneGeom { h, w, k, stride, pad: padding, oh, ow };
    let (x, kd) = (input.data(), kernel.data());
    let mut out = vec![0.0; n * cout * oh * ow];
    for (plane, o) in out.chunks_mut(oh * ow).enumerate() {
        let (b, co) = (plane / cout, plane % cout);
        if let Some(bias) = bias {
            o.fill(bias.data()[co]);
        }
        for ci in 0..cin {
            let xp = &x[(b * cin + ci) * h * w..(b * cin + ci + 1) * h * w];
            let kp = &kd[(co * cin + ci) * k * k..(co * cin + ci + 1) * k * k];
            corr_plane_fwd(g, xp, kp, o);
        }
    }
    Tensor::new(vec![n, cout, oh, ow], out)
}

pub fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    padding: usize,
    with_bias: bool,
) -> Result<ParamGrads> {
    let (n, cin, h, w) = input.dims4()?;
    let (cout, _, k) = square_kernel(kernel)?;
    let oh = conv_out_len(h, k, stride, padding)?;
    let ow = conv_out_len(w, k, stride, padding)?;
    if grad_out.shape() != [n, cout, oh, ow] {
        return shape_err(format!("conv2d upstream gradient has shape {:?}", grad_out.shape()));
    }
    let g = PlaneGeom { h, w, k, stride, pad: padding, oh, ow };
    let (x, kd, gd) = (input.data(), kernel.data(), grad_out.data());
    let mut gx = vec![0.0; x.len()];
    let mut gk = vec![0.0; kd.len()];
    let mut gb = vec![0.0; cout];
    for b in 0..n {
        for co in 0..cout {
            let gp = &gd[(b * cout + co) * oh * ow..(b * cout + co + 1) * oh * ow];
            gb[co] += gp.iter().sum::<f64>();
            for ci in 0..cin {
                let xr = (b * cin + ci) * h * w..(b * cin + ci + 1) * h * w;
                let kr = (co * cin + ci) * k * k..(co * cin + ci + 1) * k * k;
                corr_plane_bwd(g, &x[xr.clone()], &kd[kr.clone()], gp, &mut gx[xr], &mut gk[kr]);
            }
        }
    }
    Ok(ParamGrads {
        input: Tensor::new(input.shape().to_vec(), gx)?,
        weight: Tensor::new(kernel.shape().to_vec(), gk)?,
        bias: with_bias.then(|| Tensor::new(vec![cout], gb)).transpose()?,
    })
}

/// Per-channel spatial convolution. `kernel` is `[C, 1, k, k]`.
pub fn depthwise_conv2d(
    input: &Tensor,
    kernel: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    let (kc, one, k) = square_kernel(kernel)?;
    if kc != c || one != 1 {
        return shape_err(format!(
            "depthwise kernel must be [{c}, 1, k, k], got {:?}",
            kernel.shape()
        ));
    }
    check_bias(bias, c, "depthwise")?;
    let oh = conv_out_len(h, k, stride, padding)?;
    let ow = conv_out_len(w, k, stride, padding)?;
    let g = PlaneGeom { h, w, k, stride, pad: padding, oh, ow };
    let (x, kd) = (input.data(), kernel.data());
    let mut out = vec![0.0; n * c * oh * ow];
    for (plane, o) in out.chunks_mut(oh * ow).enumerate() {
        let ch = plane % c;
        if let Some(bias) = bias {
            o.fill(bias.data()[ch]);
        }
        corr_plane_fwd(
            g,
            &x[plane * h * w..(plane + 1) * h * w],
            &kd[ch * k * k..(ch + 1) * k * k],
            o,
        );
    }
    Tensor::new(vec![n, c, oh, ow], out)
}

pub fn depthwise_conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    padding: usize,
    with_bias: bool,
) -> Result<ParamGrads> {
    let (n, c, h, w) = input.dims4()?;
    let (_, _, k) = square_kernel(kernel)?;
    let oh = conv_out_len(h, k, stride, padding)?;
    let ow = conv_out_len(w, k, stride, padding)?;
    if grad_out.shape() != [n, c, oh, ow] {
        return shape_err(format!(
            "depthwise upstream gradient has shape {:?}",
            grad_out.shape()
        ));
    }
    let g = PlaneGeom { h, w, k, stride, pad: padding, oh, ow };
    let (x, kd, gd) = (input.data(), kernel.data(), grad_out.data());
    let mut gx = vec![0.0; x.len()];
    let mut gk = vec![0.0; kd.len()];
    let mut gb = vec![0.0; c];
    for plane in 0..n * c {
        let ch = plane % c;
        let gp = &gd[plane * oh * ow..(plane + 1) * oh * ow];
        gb[ch] += gp.iter().sum::<f64>();
        let xr = plane * h * w..(plane + 1) * h * w;
        let kr = ch * k * k..(ch + 1) * k * k;
        corr_plane_bwd(g, &x[xr.clone()], &kd[kr.clone()], gp, &mut gx[xr], &mut gk[kr]);
    }
    Ok(ParamGrads {
        input: Tensor::new(input.shape().to_vec(), gx)?,
        weight: Tensor::new(kernel.shape().to_vec(), gk)?,
        bias: with_bias.then(|| Tensor::new(vec![c], gb)).transpose()?,
    })
}

/// Depthwise `k×k` stage followed by a pointwise `1×1` stage.
pub fn depthwise_separable_conv(
    input: &Tensor,
    dw_kernel: &Tensor,
    dw_bias: Option<&Tensor>,
    pw_kernel: &Tensor,
    pw_bias: Option<&Tensor>,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let (_, _, kh, kw) = pw_kernel.dims4()?;
    if kh != 1 || kw != 1 {
        return shape_err("pointwise kernel must be 1x1");
    }
    let mid = depthwise_conv2d(input, dw_kernel, dw_bias, stride, padding)?;
    conv2d(&mid, pw_kernel, pw_bias, 1, 0)
}

/// Weight count of a depthwise-separable block: `k²·Cin + Cin·Cout`, plus
/// `Cin + Cout` when both stages carry biases.
pub fn separable_param_count(k: usize, cin: usize, cout: usize, bias: bool) -> usize {
    k * k * cin + cin * cout + if bias { cin + cout } else { 0 }
}

/// Weight count of the standard convolution with the same receptive field.
pub fn standard_param_count(k: usize, cin: usize, cout: usize, bias: bool) -> usize {
    k * k * cin * cout + if bias { cout } else { 0 }
}

pub fn pool2d(input: &Tensor, mode: PoolMode, size: usize, stride: usize) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    let oh = conv_out_len(h, size, stride, 0)?;
    let ow = conv_out_len(w, size, stride, 0)?;
    let x = input.data();
    let area = (size * size) as f64;
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let xp = &x[plane * h * w..(plane + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let rows = (oy * stride..oy * stride + size).map(|iy| &xp[iy * w..(iy + 1) * w]);
                let window = rows.flat_map(|r| &r[ox * stride..ox * stride + size]);
                out.push(match mode {
                    PoolMode::Max => window.fold(f64::NEG_INFINITY, |m, &v| m.max(v)),
                    PoolMode::Avg => window.sum::<f64>() / area,
                });
            }
        }
    }
    Tensor::new(vec![n, c, oh, ow], out)
}

/// Max pooling routes each gradient to the first maximal element of its
/// window in row-major scan order.
pub fn pool2d_backward(
    input: &Tensor,
    grad_out: &Tensor,
    mode: PoolMode,
    size: usize,
    stride: usize,
) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    let oh = conv_out_len(h, size, stride, 0)?;
    let ow = conv_out_len(w, size, stride, 0)?;
    if grad_out.shape() != [n, c, oh, ow] {
        return shape_err(format!("pool upstream gradient has shape {:?}", grad_out.shape()));
    }
    let (x, gd) = (input.data(), grad_out.data());
    let mut gx = vec![0.0; x.len()];
    let area = (size * size) as f64;
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let gv = gd[(plane * oh + oy) * ow + ox];
                match mode {
                    PoolMode::Max => {
                        let mut best = (f64::NEG_INFINITY, 0);
                        for iy in oy * stride..oy * stride + size {
                            for ix in ox * stride..ox * stride + size {
                                let idx = base + iy * w + ix;
                                if x[idx] > best.0 {
                                    best = (x[idx], idx);
                                }
                            }
                        }
                        gx[best.1] += gv;
                    }
                    PoolMode::Avg => {
                        for iy in oy * stride..oy * stride + size {
                            for ix in ox * stride..ox * stride + size {
                                gx[base + iy * w + ix] += gv / area;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(input.shape().to_vec(), gx)
}

/// `input · weights + bias` with `input: [N, D]`, `weights: [D, U]`.
pub fn dense(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, d) = input.dims2()?;
    let (wd, u) = weights.dims2()?;
    if wd != d {
        return shape_err(format!("dense expects {wd} inputs, got {d}"));
    }
    check_bias(Some(bias), u, "dense")?;
    let (x, wt) = (input.data(), weights.data());
    let mut out = Vec::with_capacity(n * u);
    for row in x.chunks(d) {
        let mut acc = bias.data().to_vec();
        for (xi, wrow) in row.iter().zip(wt.chunks(u)) {
            if *xi != 0.0 {
                for (a, wv) in acc.iter_mut().zip(wrow) {
                    *a += xi * wv;
                }
            }
        }
        out.extend(acc);
    }
    Tensor::new(vec![n, u], out)
}

pub fn dense_backward(input: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<ParamGrads> {
    let (n, d) = input.dims2()?;
    let (_, u) = weights.dims2()?;
    if grad_out.shape() != [n, u] {
        return shape_err(format!("dense upstream gradient has shape {:?}", grad_out.shape()));
    }
    let (x, wt, gd) = (input.data(), weights.data(), grad_out.data());
    let mut gx = vec![0.0; n * d];
    let mut gw = vec![0.0; d * u];
    let mut gb = vec![0.0; u];
    for b in 0..n {
        let grow = &gd[b * u..(b + 1) * u];
        for (acc, gv) in gb.iter_mut().zip(grow) {
            *acc += gv;
        }
        for i in 0..d {
            let wrow = &wt[i * u..(i + 1) * u];
            gx[b * d + i] = wrow.iter().zip(grow).map(|(a, b)| a * b).sum();
            let xi = x[b * d + i];
            for (gwv, gv) in gw[i * u..(i + 1) * u].iter_mut().zip(grow) {
                *gwv += xi * gv;
            }
        }
    }
    Ok(ParamGrads {
        input: Tensor::new(vec![n, d], gx)?,
        weight: Tensor::new(vec![d, u], gw)?,
        bias: Some(Tensor::new(vec![u], gb)?),
    })
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Elementwise sigmoid / ELU (α = 1), or softmax over the last axis.
pub fn activate(x: &Tensor, kind: Activation) -> Tensor {
    match kind {
        Activation::Sigmoid => Tensor::from_fn(x.shape(), |i| sigmoid(x.data()[i])),
        Activation::Elu => Tensor::from_fn(x.shape(), |i| elu(x.data()[i])),
        Activation::Softmax => {
            let last = *x.shape().last().expect("tensor has at least one axis");
            let mut out = Vec::with_capacity(x.len());
            for row in x.data().chunks(last) {
                let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let start = out.len();
                out.extend(row.iter().map(|v| (v - m).exp()));
                let s: f64 = out[start..].iter().sum();
                out[start..].iter_mut().for_each(|v| *v /= s);
            }
            Tensor::new(x.shape().to_vec(), out).expect("same shape")
        }
    }
}

pub fn activate_backward(input: &Tensor, output: &Tensor, grad_out: &Tensor, kind: Activation) -> Tensor {
    let (x, y, g) = (input.data(), output.data(), grad_out.data());
    match kind {
        Activation::Sigmoid => Tensor::from_fn(input.shape(), |i| g[i] * y[i] * (1.0 - y[i])),
        Activation::Elu => Tensor::from_fn(input.shape(), |i| {
            if x[i] > 0.0 {
                g[i]
            } else {
                g[i] * (y[i] + 1.0)
            }
        }),
        Activation::Softmax => {
            let last = *input.shape().last().expect("tensor has at least one axis");
            let mut out = Vec::with_capacity(x.len());
            for (yr, gr) in y.chunks(last).zip(g.chunks(last)) {
                let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                out.extend(yr.iter().zip(gr).map(|(yv, gv)| yv * (gv - dot)));
            }
            Tensor::new(input.shape().to_vec(), out).expect("same shape")
        }
    }
}

pub fn flatten(x: &Tensor) -> Tensor {
    let n = x.shape()[0];
    let d = x.len() / n;
    x.clone().reshape(&[n, d]).expect("same element count")
}

fn check_labels(probs: &Tensor, labels: &[usize]) -> Result<(usize, usize)> {
    let (n, k) = probs.dims2()?;
    if labels.len() != n {
        return shape_err(format!("{} labels for a batch of {n}", labels.len()));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(NetError::LabelOutOfRange { label, classes: k });
    }
    Ok((n, k))
}

/// Mean sparse categorical cross-entropy over the batch.
pub fn scce_loss(probs: &Tensor, labels: &[usize]) -> Result<f64> {
    let (n, k) = check_labels(probs, labels)?;
    let p = probs.data();
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -p[i * k + y].max(PROB_FLOOR).ln())
        .sum();
    Ok(total / n as f64)
}

/// Gradient of [`scce_loss`] with respect to `probs`.
pub fn scce_grad(probs: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let (n, k) = check_labels(probs, labels)?;
    let p = probs.data();
    let mut g = Tensor::zeros(&[n, k]);
    for (i, &y) in labels.iter().enumerate() {
        let pv = p[i * k + y];
        if pv > PROB_FLOOR {
            g.data_mut()[i * k + y] = -1.0 / (n as f64 * pv);
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_of_ones() {
        let x = Tensor::filled(&[1, 1, 3, 3], 1.0);
        let k = Tensor::filled(&[1, 1, 2, 2], 1.0);
        let y = conv2d(&x, &k, Some(&Tensor::zeros(&[1])), 1, 0).unwrap();
        assert_eq!(y.shape(), [1, 1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn unit_kernel_is_identity() {
        let x = Tensor::from_fn(&[2, 1, 4, 5], |i| i as f64 * 0.5 - 3.0);
        let k = Tensor::filled(&[1, 1, 1, 1], 1.0);
        assert_eq!(conv2d(&x, &k, None, 1, 0).unwrap(), x);
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let x = Tensor::zeros(&[1, 2, 4, 4]);
        let k = Tensor::zeros(&[1, 3, 3, 3]);
        assert!(matches!(conv2d(&x, &k, None, 1, 0), Err(NetError::ShapeMismatch(_))));
        let small = Tensor::zeros(&[1, 3, 2, 2]);
        assert!(conv2d(&small, &k, None, 1, 0).is_err());
    }

    #[test]
    fn output_length_formula() {
        assert_eq!(conv_out_len(32, 3, 2, 1).unwrap(), 16);
        assert_eq!(conv_out_len(5, 3, 1, 0).unwrap(), 3);
        assert_eq!(conv_out_len(7, 3, 3, 1).unwrap(), 3);
    }

    #[test]
    fn pooling_small_window() {
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(pool2d(&x, PoolMode::Max, 2, 2).unwrap().data(), [4.0]);
        assert_eq!(pool2d(&x, PoolMode::Avg, 2, 2).unwrap().data(), [2.5]);
        let c = Tensor::filled(&[1, 2, 4, 4], 7.0);
        for mode in [PoolMode::Max, PoolMode::Avg] {
            let y = pool2d(&c, mode, 2, 2).unwrap();
            assert!(y.data().iter().all(|&v| v == 7.0));
        }
    }

    #[test]
    fn dense_arithmetic() {
        let x = Tensor::scalar(5.0).reshape(&[1, 1]).unwrap();
        let w = Tensor::scalar(2.0).reshape(&[1, 1]).unwrap();
        let b = Tensor::scalar(3.0);
        assert_eq!(dense(&x, &w, &b).unwrap().data(), [13.0]);

        let x = Tensor::from_fn(&[3, 4], |i| i as f64);
        let eye = Tensor::from_fn(&[4, 4], |i| if i / 4 == i % 4 { 1.0 } else { 0.0 });
        assert_eq!(dense(&x, &eye, &Tensor::zeros(&[4])).unwrap(), x);
    }

    #[test]
    fn activation_values() {
        let x = Tensor::new(vec![1, 2], vec![0.0, -1.0]).unwrap();
        let s = activate(&x, Activation::Sigmoid);
        assert_eq!(s.data()[0], 0.5);
        let e = activate(&x, Activation::Elu);
        assert_eq!(e.data()[0], 0.0);
        assert!((e.data()[1] - (-0.632_120_558_828_557_7)).abs() < 1e-12);
        let z = Tensor::zeros(&[1, 2]);
        assert_eq!(activate(&z, Activation::Softmax).data(), [0.5, 0.5]);
    }

    #[test]
    fn softmax_shift_invariant() {
        let x = Tensor::new(vec![2, 3], vec![1.0, -2.0, 0.5, 3.0, 3.0, -1.0]).unwrap();
        let shifted = Tensor::from_fn(x.shape(), |i| x.data()[i] + 1234.5);
        let a = activate(&x, Activation::Softmax);
        let b = activate(&shifted, Activation::Softmax);
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_values() {
        let p = Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap();
        assert_eq!(scce_loss(&p, &[1]).unwrap(), 0.0);
        let h = Tensor::new(vec![1, 2], vec![0.5, 0.5]).unwrap();
        assert!((scce_loss(&h, &[0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let u = Tensor::filled(&[1, 214], 1.0 / 214.0);
        assert!((scce_loss(&u, &[7]).unwrap() - 214f64.ln()).abs() < 1e-12);
        assert!((214f64.ln() - 5.366).abs() < 1e-3);
        assert!(matches!(
            scce_loss(&h, &[2]),
            Err(NetError::LabelOutOfRange { label: 2, classes: 2 })
        ));
        // floored probability keeps the loss finite
        assert!((scce_loss(&p, &[0]).unwrap() - (-PROB_FLOOR.ln())).abs() < 1e-9);
    }

    #[test]
    fn flatten_preserves_order() {
        let x = Tensor::from_fn(&[2, 1, 2, 2], |i| i as f64);
        let f = flatten(&x);
        assert_eq!(f.shape(), [2, 4]);
        assert_eq!(f.data(), x.data());
        let flat = Tensor::from_fn(&[3, 5], |i| i as f64);
        assert_eq!(flatten(&flat), flat);
        assert_eq!(f.reshape(&[2, 1, 2, 2]).unwrap(), x);
    }

    #[test]
    fn separable_counts() {
        assert_eq!(separable_param_count(3, 32, 64, false), 2336);
        assert_eq!(standard_param_count(3, 32, 64, false), 18_432);
        assert_eq!(standard_param_count(3, 32, 64, true), 18_496);
    }
}

//! Pure tensor operations: the forward math plus the adjoint kernels the
//! tape uses for backpropagation.
//!
//! Shapes are validated up front and every published result is scanned
//! for NaN/Inf, so a non-finite value surfaces as an error at the op
//! that produced it instead of poisoning downstream math silently.
//! Convolutions run as im2col plus a small blocked matmul; their
//! correctness is pinned against the loop references in
//! [`crate::verify`].

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

pub(crate) fn ensure_finite(op: &'static str, t: Tensor) -> Result<Tensor> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(Error::NonFinite { op })
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op,
            detail: format!("{} vs {}", a.shape(), b.shape()),
        });
    }
    Ok(())
}

/// c[m][n] += a[m][k] * b[k][n], all row-major.
fn mm_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            let brow = &b[kk * n..(kk + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
}

/// c[m][n] += a[m][k] dot b[n][k] (b transposed), all row-major.
fn mm_bt_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for kk in 0..k {
                acc += arow[kk] * brow[kk];
            }
            c[i * n + j] += acc;
        }
    }
}

/// Unfolds one batch item into columns: row (c*kh + u)*kw + v holds the
/// input value each output position reads at kernel tap (c, u, v), zero
/// where the tap falls outside the image.
#[allow(clippy::too_many_arguments)]
fn im2col(
    x: &Tensor,
    n: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f64> {
    let s = x.shape();
    let cols_w = out_h * out_w;
    let mut cols = vec![0.0; s.c * kh * kw * cols_w];
    let data = x.data();
    for c in 0..s.c {
        for u in 0..kh {
            for v in 0..kw {
                let row = ((c * kh + u) * kw + v) * cols_w;
                for i in 0..out_h {
                    let ii = (i * stride + u) as isize - pad as isize;
                    if ii < 0 || ii as usize >= s.h {
                        continue;
                    }
                    let src_row = s.index(n, c, ii as usize, 0);
                    let dst_row = row + i * out_w;
                    for j in 0..out_w {
                        let jj = (j * stride + v) as isize - pad as isize;
                        if jj >= 0 && (jj as usize) < s.w {
                            cols[dst_row + j] = data[src_row + jj as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn conv_out_dims(op: &'static str, xs: Shape, kh: usize, kw: usize, stride: usize, pad: usize) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(Error::InvalidArgument { op, detail: "stride must be >= 1".into() });
    }
    if xs.h + 2 * pad < kh || xs.w + 2 * pad < kw {
        return Err(Error::InvalidArgument {
            op,
            detail: format!("kernel {}x{} larger than padded input {}x{}", kh, kw, xs.h + 2 * pad, xs.w + 2 * pad),
        });
    }
    Ok(((xs.h + 2 * pad - kh) / stride + 1, (xs.w + 2 * pad - kw) / stride + 1))
}

fn check_bias(op: &'static str, b: Option<&Tensor>, channels: usize) -> Result<()> {
    if let Some(b) = b {
        let bs = b.shape();
        if bs != Shape::new(1, channels, 1, 1) {
            return Err(Error::ShapeMismatch {
                op,
                detail: format!("bias {} vs expected 1x{}x1x1", bs, channels),
            });
        }
    }
    Ok(())
}

/// 2-D convolution (cross-correlation) with zero padding.
/// `x`: N x Cin x H x W, `w`: Cout x Cin x kh x kw, `b`: 1 x Cout x 1 x 1.
pub fn conv2d(x: &Tensor, w: &Tensor, b: Option<&Tensor>, stride: usize, pad: usize) -> Result<Tensor> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.c != ws.c {
        return Err(Error::ShapeMismatch {
            op: "conv2d",
            detail: format!("input {} has {} channels, kernel {} expects {}", xs, xs.c, ws, ws.c),
        });
    }
    check_bias("conv2d", b, ws.n)?;
    let (out_h, out_w) = conv_out_dims("conv2d", xs, ws.h, ws.w, stride, pad)?;
    let out_shape = Shape::new(xs.n, ws.n, out_h, out_w);
    let mut out = vec![0.0; out_shape.len()];
    let cols_w = out_h * out_w;
    let k = ws.c * ws.h * ws.w;
    for n in 0..xs.n {
        let cols = im2col(x, n, ws.h, ws.w, stride, pad, out_h, out_w);
        let dst = &mut out[out_shape.index(n, 0, 0, 0)..out_shape.index(n, 0, 0, 0) + ws.n * cols_w];
        mm_acc(w.data(), &cols, dst, ws.n, k, cols_w);
    }
    if let Some(b) = b {
        for n in 0..xs.n {
            for o in 0..ws.n {
                let bias = b.at(0, o, 0, 0);
                let base = out_shape.index(n, o, 0, 0);
                for p in &mut out[base..base + cols_w] {
                    *p += bias;
                }
            }
        }
    }
    ensure_finite("conv2d", Tensor::new(out_shape, out)?)
}

/// Core scatter shared by the transposed convolution and the input
/// gradient of `conv2d`: out[n, b, i*s - p + u, j*s - p + v] +=
/// x[n, a, i, j] * w[a, b, u, v], with explicit output dims because the
/// forward conv may have dropped rows the stride never reached.
fn conv_scatter(x: &Tensor, w: &Tensor, stride: usize, pad: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let (xs, ws) = (x.shape(), w.shape());
    let out_shape = Shape::new(xs.n, ws.c, out_h, out_w);
    let mut out = vec![0.0; out_shape.len()];
    let xdata = x.data();
    let wdata = w.data();
    for n in 0..xs.n {
        for a in 0..xs.c {
            for bch in 0..ws.c {
                let wbase = (a * ws.c + bch) * ws.h * ws.w;
                for i in 0..xs.h {
                    let xrow = xs.index(n, a, i, 0);
                    for u in 0..ws.h {
                        let oi = (i * stride + u) as isize - pad as isize;
                        if oi < 0 || oi as usize >= out_h {
                            continue;
                        }
                        let orow = out_shape.index(n, bch, oi as usize, 0);
                        for v in 0..ws.w {
                            let wv = wdata[wbase + u * ws.w + v];
                            if wv == 0.0 {
                                continue;
                            }
                            for j in 0..xs.w {
                                let oj = (j * stride + v) as isize - pad as isize;
                                if oj >= 0 && (oj as usize) < out_w {
                                    out[orow + oj as usize] += xdata[xrow + j] * wv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Transposed 2-D convolution, the adjoint of [`conv2d`] for the same
/// weight tensor. `x`: N x A x H x W, `w`: A x B x kh x kw (the layout a
/// forward conv from B to A channels would use), output
/// N x B x ((H-1)*stride - 2*pad + kh) x ((W-1)*stride - 2*pad + kw).
pub fn conv2d_transposed(x: &Tensor, w: &Tensor, b: Option<&Tensor>, stride: usize, pad: usize) -> Result<Tensor> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.c != ws.n {
        return Err(Error::ShapeMismatch {
            op: "conv2d_transposed",
            detail: format!("input {} has {} channels, kernel {} expects {}", xs, xs.c, ws, ws.n),
        });
    }
    check_bias("conv2d_transposed", b, ws.c)?;
    if stride == 0 {
        return Err(Error::InvalidArgument { op: "conv2d_transposed", detail: "stride must be >= 1".into() });
    }
    let oh = (xs.h - 1) * stride + ws.h;
    let ow = (xs.w - 1) * stride + ws.w;
    if oh < 2 * pad + 1 || ow < 2 * pad + 1 {
        return Err(Error::InvalidArgument {
            op: "conv2d_transposed",
            detail: format!("pad {} consumes the whole {}x{} output", pad, oh, ow),
        });
    }
    let (out_h, out_w) = (oh - 2 * pad, ow - 2 * pad);
    let out_shape = Shape::new(xs.n, ws.c, out_h, out_w);
    let mut out = conv_scatter(x, w, stride, pad, out_h, out_w);
    if let Some(b) = b {
        for n in 0..xs.n {
            for o in 0..ws.c {
                let bias = b.at(0, o, 0, 0);
                let base = out_shape.index(n, o, 0, 0);
                for p in &mut out[base..base + out_h * out_w] {
                    *p += bias;
                }
            }
        }
    }
    ensure_finite("conv2d_transposed", Tensor::new(out_shape, out)?)
}

/// d(conv2d)/dx: scatter the output gradient back through the kernel.
pub(crate) fn conv2d_grad_input(gy: &Tensor, w: &Tensor, stride: usize, pad: usize, in_h: usize, in_w: usize) -> Tensor {
    // gy channels are the conv's Cout = w's first axis, so the shared
    // scatter applies with (a, b) = (out channel, in channel).
    let shape = Shape::new(gy.shape().n, w.shape().c, in_h, in_w);
    Tensor::new(shape, conv_scatter(gy, w, stride, pad, in_h, in_w)).expect("length computed from shape")
}

/// d(conv2d)/dw: correlate input with the output gradient.
pub(crate) fn conv2d_grad_weight(gy: &Tensor, x: &Tensor, ws: Shape, stride: usize, pad: usize) -> Tensor {
    let (gs, _) = (gy.shape(), x.shape());
    let cols_w = gs.h * gs.w;
    let k_len = ws.c * ws.h * ws.w;
    let mut gw = vec![0.0; ws.len()];
    for n in 0..gs.n {
        let cols = im2col(x, n, ws.h, ws.w, stride, pad, gs.h, gs.w);
        let gyn = &gy.data()[gs.index(n, 0, 0, 0)..gs.index(n, 0, 0, 0) + gs.c * cols_w];
        mm_bt_acc(gyn, &cols, &mut gw, gs.c, cols_w, k_len);
    }
    Tensor::new(ws, gw).expect("length computed from shape")
}

/// Gradient of a conv bias: sum of the output gradient over N, H, W.
pub(crate) fn grad_bias(gy: &Tensor) -> Tensor {
    let gs = gy.shape();
    let mut gb = vec![0.0; gs.c];
    for n in 0..gs.n {
        for c in 0..gs.c {
            let base = gs.index(n, c, 0, 0);
            gb[c] += gy.data()[base..base + gs.h * gs.w].iter().sum::<f64>();
        }
    }
    Tensor::new(Shape::new(1, gs.c, 1, 1), gb).expect("length computed from shape")
}

/// d(conv2d_transposed)/dx: a plain convolution of the output gradient
/// with the same kernel. Dimensions recover the input exactly.
pub(crate) fn convt_grad_input(gy: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    conv2d(gy, w, None, stride, pad)
}

/// d(conv2d_transposed)/dw: gw[a, b, u, v] = sum over n, i, j of
/// x[n, a, i, j] * gy[n, b, i*s - p + u, j*s - p + v].
pub(crate) fn convt_grad_weight(gy: &Tensor, x: &Tensor, ws: Shape, stride: usize, pad: usize) -> Tensor {
    let (gs, xs) = (gy.shape(), x.shape());
    let cols_w = xs.h * xs.w;
    let k_len = ws.c * ws.h * ws.w;
    // Unfolding gy at the input's grid positions turns the scatter sum
    // into the same correlation shape as the forward conv's gw.
    let mut gw_swapped = vec![0.0; ws.len()];
    for n in 0..gs.n {
        let cols = im2col(gy, n, ws.h, ws.w, stride, pad, xs.h, xs.w);
        let xn = &x.data()[xs.index(n, 0, 0, 0)..xs.index(n, 0, 0, 0) + xs.c * cols_w];
        mm_bt_acc(xn, &cols, &mut gw_swapped, xs.c, cols_w, k_len);
    }
    // gw_swapped is laid out [a][b][u][v] already: rows a, columns (b,u,v).
    Tensor::new(ws, gw_swapped).expect("length computed from shape")
}

/// Non-overlapping r x r box average. H and W must be divisible by r.
pub fn avg_pool2d(x: &Tensor, r: usize) -> Result<Tensor> {
    let s = x.shape();
    if r == 0 || s.h % r != 0 || s.w % r != 0 {
        return Err(Error::InvalidArgument {
            op: "avg_pool2d",
            detail: format!("spatial dims {}x{} not divisible by window {}", s.h, s.w, r),
        });
    }
    let out_shape = Shape::new(s.n, s.c, s.h / r, s.w / r);
    let mut out = vec![0.0; out_shape.len()];
    let norm = 1.0 / (r * r) as f64;
    let data = x.data();
    for n in 0..s.n {
        for c in 0..s.c {
            for i in 0..out_shape.h {
                let dst = out_shape.index(n, c, i, 0);
                for u in 0..r {
                    let src = s.index(n, c, i * r + u, 0);
                    for j in 0..out_shape.w {
                        let row = &data[src + j * r..src + j * r + r];
                        out[dst + j] += row.iter().sum::<f64>();
                    }
                }
            }
        }
    }
    for p in &mut out {
        *p *= norm;
    }
    ensure_finite("avg_pool2d", Tensor::new(out_shape, out)?)
}

/// d(avg_pool2d)/dx: spread each pooled gradient evenly over its block.
pub(crate) fn avg_pool2d_grad(gy: &Tensor, r: usize, in_h: usize, in_w: usize) -> Tensor {
    let gs = gy.shape();
    let shape = Shape::new(gs.n, gs.c, in_h, in_w);
    let norm = 1.0 / (r * r) as f64;
    Tensor::from_fn(shape, |n, c, i, j| gy.at(n, c, i / r, j / r) * norm)
}

fn bilinear_taps(o: usize, r: usize, n: usize) -> (usize, usize, f64) {
    let p = ((o as f64 + 0.5) / r as f64 - 0.5).clamp(0.0, (n - 1) as f64);
    let lo = p.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    (lo, hi, p - lo as f64)
}

/// Bilinear upsampling by an integer factor with half-pixel sample
/// centres (align_corners = false) and clamped borders.
pub fn upsample_bilinear(x: &Tensor, r: usize) -> Result<Tensor> {
    if r == 0 {
        return Err(Error::InvalidArgument { op: "upsample_bilinear", detail: "factor must be >= 1".into() });
    }
    let s = x.shape();
    let out_shape = Shape::new(s.n, s.c, s.h * r, s.w * r);
    // Tap positions depend only on the axis coordinate; precompute them.
    let rows: Vec<(usize, usize, f64)> = (0..out_shape.h).map(|i| bilinear_taps(i, r, s.h)).collect();
    let cols: Vec<(usize, usize, f64)> = (0..out_shape.w).map(|j| bilinear_taps(j, r, s.w)).collect();
    let mut out = vec![0.0; out_shape.len()];
    let data = x.data();
    for n in 0..s.n {
        for c in 0..s.c {
            for (i, &(i0, i1, ti)) in rows.iter().enumerate() {
                let r0 = s.index(n, c, i0, 0);
                let r1 = s.index(n, c, i1, 0);
                let dst = out_shape.index(n, c, i, 0);
                for (j, &(j0, j1, tj)) in cols.iter().enumerate() {
                    let top = (1.0 - tj) * data[r0 + j0] + tj * data[r0 + j1];
                    let bot = (1.0 - tj) * data[r1 + j0] + tj * data[r1 + j1];
                    out[dst + j] = (1.0 - ti) * top + ti * bot;
                }
            }
        }
    }
    ensure_finite("upsample_bilinear", Tensor::new(out_shape, out)?)
}

/// d(upsample_bilinear)/dx: route each output gradient back to its four
/// taps with the interpolation weights.
pub(crate) fn upsample_bilinear_grad(gy: &Tensor, r: usize, in_h: usize, in_w: usize) -> Tensor {
    let gs = gy.shape();
    let shape = Shape::new(gs.n, gs.c, in_h, in_w);
    let rows: Vec<(usize, usize, f64)> = (0..gs.h).map(|i| bilinear_taps(i, r, in_h)).collect();
    let cols: Vec<(usize, usize, f64)> = (0..gs.w).map(|j| bilinear_taps(j, r, in_w)).collect();
    let mut out = vec![0.0; shape.len()];
    for n in 0..gs.n {
        for c in 0..gs.c {
            for (i, &(i0, i1, ti)) in rows.iter().enumerate() {
                for (j, &(j0, j1, tj)) in cols.iter().enumerate() {
                    let g = gy.at(n, c, i, j);
                    out[shape.index(n, c, i0, j0)] += g * (1.0 - ti) * (1.0 - tj);
                    out[shape.index(n, c, i0, j1)] += g * (1.0 - ti) * tj;
                    out[shape.index(n, c, i1, j0)] += g * ti * (1.0 - tj);
                    out[shape.index(n, c, i1, j1)] += g * ti * tj;
                }
            }
        }
    }
    Tensor::new(shape, out).expect("length computed from shape")
}

fn map(op: &'static str, x: &Tensor, f: impl Fn(f64) -> f64) -> Result<Tensor> {
    let out: Vec<f64> = x.data().iter().map(|&v| f(v)).collect();
    ensure_finite(op, Tensor::new(x.shape(), out)?)
}

fn zip(op: &'static str, a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    same_shape(op, a, b)?;
    let out: Vec<f64> = a.data().iter().zip(b.data().iter()).map(|(&x, &y)| f(x, y)).collect();
    ensure_finite(op, Tensor::new(a.shape(), out)?)
}

/// Logistic sigmoid, numerically stable on both tails.
pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    map("sigmoid", x, sigmoid_scalar)
}

pub(crate) fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// PReLU with a single learnable slope for the negative half.
pub fn prelu(x: &Tensor, slope: f64) -> Result<Tensor> {
    map("prelu", x, |v| if v >= 0.0 { v } else { slope * v })
}

/// Leaky ReLU with a fixed slope.
pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    prelu(x, slope)
}

pub fn relu(x: &Tensor) -> Result<Tensor> {
    prelu(x, 0.0)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip("add", a, b, |x, y| x + y)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip("sub", a, b, |x, y| x - y)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip("mul", a, b, |x, y| x * y)
}

/// Elementwise m*x + a with scalar constants.
pub fn affine(x: &Tensor, m: f64, a: f64) -> Result<Tensor> {
    map("affine", x, |v| m * v + a)
}

pub fn clamp(x: &Tensor, lo: f64, hi: f64) -> Result<Tensor> {
    if !(lo <= hi) {
        return Err(Error::InvalidArgument { op: "clamp", detail: format!("lo {lo} > hi {hi}") });
    }
    map("clamp", x, |v| v.clamp(lo, hi))
}

/// Natural log. Non-positive inputs surface as a non-finite error.
pub fn ln(x: &Tensor) -> Result<Tensor> {
    map("ln", x, f64::ln)
}

/// Softplus ln(1 + e^x), evaluated stably.
pub fn softplus(x: &Tensor) -> Result<Tensor> {
    map("softplus", x, softplus_scalar)
}

pub(crate) fn softplus_scalar(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

/// Mean over every element, as a 1x1x1x1 tensor.
pub fn mean_all(x: &Tensor) -> Result<Tensor> {
    if x.is_empty() {
        return Err(Error::InvalidArgument { op: "mean_all", detail: "empty tensor".into() });
    }
    let m = x.data().iter().sum::<f64>() / x.len() as f64;
    ensure_finite("mean_all", Tensor::scalar(m))
}

/// Sum over every element, as a 1x1x1x1 tensor.
pub fn sum_all(x: &Tensor) -> Result<Tensor> {
    ensure_finite("sum_all", Tensor::scalar(x.data().iter().sum::<f64>()))
}

/// Mean over the spatial dims only: NxCxHxW -> NxCx1x1. Keeps each
/// sample and channel separate, unlike [`mean_all`].
pub fn spatial_mean(x: &Tensor) -> Result<Tensor> {
    let s = x.shape();
    let area = (s.h * s.w) as f64;
    let out = Tensor::from_fn(Shape::new(s.n, s.c, 1, 1), |n, c, _, _| {
        let mut acc = 0.0;
        for i in 0..s.h {
            for j in 0..s.w {
                acc += x.at(n, c, i, j);
            }
        }
        acc / area
    });
    ensure_finite("spatial_mean", out)
}

/// Stacks `a`'s channels before `b`'s. N, H, W must match.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.n != sb.n || sa.h != sb.h || sa.w != sb.w {
        return Err(Error::ShapeMismatch {
            op: "concat_channels",
            detail: format!("{sa} vs {sb}"),
        });
    }
    let out_shape = Shape::new(sa.n, sa.c + sb.c, sa.h, sa.w);
    let mut out = Vec::with_capacity(out_shape.len());
    let plane_a = sa.c * sa.h * sa.w;
    let plane_b = sb.c * sb.h * sb.w;
    for n in 0..sa.n {
        out.extend_from_slice(&a.data()[n * plane_a..(n + 1) * plane_a]);
        out.extend_from_slice(&b.data()[n * plane_b..(n + 1) * plane_b]);
    }
    Tensor::new(out_shape, out)
}

/// Channels `from..to` of `x` as their own tensor.
pub fn slice_channels(x: &Tensor, from: usize, to: usize) -> Result<Tensor> {
    let s = x.shape();
    if from >= to || to > s.c {
        return Err(Error::InvalidArgument {
            op: "slice_channels",
            detail: format!("range {from}..{to} out of 0..{}", s.c),
        });
    }
    let out_shape = Shape::new(s.n, to - from, s.h, s.w);
    let plane = s.h * s.w;
    let mut out = Vec::with_capacity(out_shape.len());
    for n in 0..s.n {
        let base = s.index(n, from, 0, 0);
        out.extend_from_slice(&x.data()[base..base + (to - from) * plane]);
    }
    Tensor::new(out_shape, out)
}

/// Splits channels into [0, k) and [k, C).
pub fn split_channels(x: &Tensor, k: usize) -> Result<(Tensor, Tensor)> {
    let c = x.shape().c;
    if k == 0 || k >= c {
        return Err(Error::InvalidArgument {
            op: "split_channels",
            detail: format!("split point {k} must lie strictly inside 0..{c}"),
        });
    }
    Ok((slice_channels(x, 0, k)?, slice_channels(x, k, c)?))
}

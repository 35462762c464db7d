//! Reference implementations and gradient checking.
//!
//! Everything in this module is written for clarity, not speed: plain
//! nested loops that transcribe each operation's definition directly.
//! The fast paths in [`crate::tensor::ops`] and [`crate::imaging`] are
//! tested against these references, so nothing here may call into the
//! code it checks. The `gradcheck` command and the test suites both run
//! the suites in [`suites`].

pub mod suites;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// Direct six-loop convolution (cross-correlation) with zero padding.
///
/// `x`: N x Cin x H x W, `w`: Cout x Cin x kh x kw, `b`: optional
/// 1 x Cout x 1 x 1. Output position (i, j) reads input rows
/// `i*stride - pad + u` for `u` in `0..kh`; out-of-range reads are zero.
pub fn conv2d_reference(
    x: &Tensor,
    w: &Tensor,
    b: Option<&Tensor>,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.c != ws.c {
        return Err(Error::ShapeMismatch {
            op: "conv2d_reference",
            detail: format!("input channels {} vs kernel channels {}", xs.c, ws.c),
        });
    }
    if stride == 0 {
        return Err(Error::InvalidArgument { op: "conv2d_reference", detail: "stride must be >= 1".into() });
    }
    if xs.h + 2 * pad < ws.h || xs.w + 2 * pad < ws.w {
        return Err(Error::InvalidArgument {
            op: "conv2d_reference",
            detail: format!("kernel {}x{} larger than padded input", ws.h, ws.w),
        });
    }
    let out_h = (xs.h + 2 * pad - ws.h) / stride + 1;
    let out_w = (xs.w + 2 * pad - ws.w) / stride + 1;
    let out_shape = Shape::new(xs.n, ws.n, out_h, out_w);
    let mut out = vec![0.0; out_shape.len()];
    for n in 0..xs.n {
        for o in 0..ws.n {
            let bias = b.map(|t| t.at(0, o, 0, 0)).unwrap_or(0.0);
            for i in 0..out_h {
                for j in 0..out_w {
                    let mut acc = bias;
                    for c in 0..xs.c {
                        for u in 0..ws.h {
                            for v in 0..ws.w {
                                let ii = (i * stride + u) as isize - pad as isize;
                                let jj = (j * stride + v) as isize - pad as isize;
                                if ii >= 0 && (ii as usize) < xs.h && jj >= 0 && (jj as usize) < xs.w {
                                    acc += x.at(n, c, ii as usize, jj as usize) * w.at(o, c, u, v);
                                }
                            }
                        }
                    }
                    out[out_shape.index(n, o, i, j)] = acc;
                }
            }
        }
    }
    Tensor::new(out_shape, out)
}

/// Inserts `stride - 1` zeros between neighbouring samples along H and W.
/// A 2x2 input at stride 2 becomes 3x3 with the originals at even indices.
pub fn zero_stuff(x: &Tensor, stride: usize) -> Tensor {
    let s = x.shape();
    let out_shape = Shape::new(s.n, s.c, (s.h - 1) * stride + 1, (s.w - 1) * stride + 1);
    let mut out = vec![0.0; out_shape.len()];
    for n in 0..s.n {
        for c in 0..s.c {
            for i in 0..s.h {
                for j in 0..s.w {
                    out[out_shape.index(n, c, i * stride, j * stride)] = x.at(n, c, i, j);
                }
            }
        }
    }
    Tensor::new(out_shape, out).expect("length computed from shape")
}

/// Transposed convolution by the zero-stuffing construction: stuff the
/// input with `stride - 1` zeros, flip the kernel spatially, swap its
/// channel axes, then run a stride-1 convolution with pad `k - 1 - pad`.
///
/// `w` is laid out Cin x Cout x kh x kw (the same tensor a forward
/// convolution from Cout to Cin channels would use), which makes
/// `conv2d_transposed` the exact adjoint of `conv2d` for a shared `w`.
pub fn conv2d_transposed_reference(
    x: &Tensor,
    w: &Tensor,
    b: Option<&Tensor>,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.c != ws.n {
        return Err(Error::ShapeMismatch {
            op: "conv2d_transposed_reference",
            detail: format!("input channels {} vs kernel first axis {}", xs.c, ws.n),
        });
    }
    if pad + 1 > ws.h || pad + 1 > ws.w {
        return Err(Error::InvalidArgument {
            op: "conv2d_transposed_reference",
            detail: format!("pad {} must be at most kernel-1 ({}x{})", pad, ws.h, ws.w),
        });
    }
    let stuffed = zero_stuff(x, stride);
    // flipped[o][c][u][v] = w[c][o][kh-1-u][kw-1-v]
    let flipped = Tensor::from_fn(Shape::new(ws.c, ws.n, ws.h, ws.w), |o, c, u, v| {
        w.at(c, o, ws.h - 1 - u, ws.w - 1 - v)
    });
    conv2d_reference(&stuffed, &flipped, b, 1, ws.h - 1 - pad)
}

/// Non-overlapping box average over r x r blocks. H and W must divide by r.
pub fn avg_pool2d_reference(x: &Tensor, r: usize) -> Result<Tensor> {
    let s = x.shape();
    if r == 0 || s.h % r != 0 || s.w % r != 0 {
        return Err(Error::InvalidArgument {
            op: "avg_pool2d_reference",
            detail: format!("spatial dims {}x{} not divisible by window {}", s.h, s.w, r),
        });
    }
    let out_shape = Shape::new(s.n, s.c, s.h / r, s.w / r);
    let norm = 1.0 / (r * r) as f64;
    Ok(Tensor::from_fn(out_shape, |n, c, i, j| {
        let mut acc = 0.0;
        for u in 0..r {
            for v in 0..r {
                acc += x.at(n, c, i * r + u, j * r + v);
            }
        }
        acc * norm
    }))
}

/// Bilinear upsampling by integer factor `r` with half-pixel sample
/// centres (align_corners = false): output row `i` reads source position
/// `(i + 0.5) / r - 0.5`, clamped to the valid range at the borders.
pub fn upsample_bilinear_reference(x: &Tensor, r: usize) -> Result<Tensor> {
    if r == 0 {
        return Err(Error::InvalidArgument {
            op: "upsample_bilinear_reference",
            detail: "factor must be >= 1".into(),
        });
    }
    let s = x.shape();
    let out_shape = Shape::new(s.n, s.c, s.h * r, s.w * r);
    let src = |o: usize, n: usize| -> (usize, usize, f64) {
        let p = ((o as f64 + 0.5) / r as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let lo = p.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        (lo, hi, p - lo as f64)
    };
    Ok(Tensor::from_fn(out_shape, |n, c, i, j| {
        let (i0, i1, ti) = src(i, s.h);
        let (j0, j1, tj) = src(j, s.w);
        let top = (1.0 - tj) * x.at(n, c, i0, j0) + tj * x.at(n, c, i0, j1);
        let bot = (1.0 - tj) * x.at(n, c, i1, j0) + tj * x.at(n, c, i1, j1);
        (1.0 - ti) * top + ti * bot
    }))
}

/// Catmull-Rom kernel (the a = -0.5 cubic).
fn catmull_rom(t: f64) -> f64 {
    let t = t.abs();
    if t < 1.0 {
        1.5 * t * t * t - 2.5 * t * t + 1.0
    } else if t < 2.0 {
        -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0
    } else {
        0.0
    }
}

/// Half-sample symmetric reflection of index `i` into `0..n`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i % period;
    if m < 0 {
        m += period;
    }
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Direct (non-separable) Catmull-Rom resampler with the same contract
/// as the production resizer: half-pixel centres, reflected borders,
/// kernel widened by the downscale ratio for antialiasing, and weights
/// normalised over the window. Evaluates the full 2-D window per output
/// pixel; quadratic work per pixel, test use only.
pub fn bicubic_reference(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let s = x.shape();
    if out_h == 0 || out_w == 0 || s.h == 0 || s.w == 0 {
        return Err(Error::InvalidArgument {
            op: "bicubic_reference",
            detail: "source and target dims must be nonzero".into(),
        });
    }
    let ratio_h = s.h as f64 / out_h as f64;
    let ratio_w = s.w as f64 / out_w as f64;
    let scale_h = ratio_h.max(1.0);
    let scale_w = ratio_w.max(1.0);
    let out_shape = Shape::new(s.n, s.c, out_h, out_w);
    Ok(Tensor::from_fn(out_shape, |n, c, oi, oj| {
        let cy = (oi as f64 + 0.5) * ratio_h - 0.5;
        let cx = (oj as f64 + 0.5) * ratio_w - 0.5;
        let y_lo = (cy - 2.0 * scale_h).ceil() as isize;
        let y_hi = (cy + 2.0 * scale_h).floor() as isize;
        let x_lo = (cx - 2.0 * scale_w).ceil() as isize;
        let x_hi = (cx + 2.0 * scale_w).floor() as isize;
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for iy in y_lo..=y_hi {
            let wy = catmull_rom((cy - iy as f64) / scale_h);
            if wy == 0.0 {
                continue;
            }
            for ix in x_lo..=x_hi {
                let wx = catmull_rom((cx - ix as f64) / scale_w);
                if wx == 0.0 {
                    continue;
                }
                acc += wy * wx * x.at(n, c, reflect(iy, s.h), reflect(ix, s.w));
                wsum += wy * wx;
            }
        }
        acc / wsum
    }))
}

/// Straight-line transcription of the self-calibrated block, built on
/// the reference primitives above plus inline scalar loops. Split the
/// channels, gate the first half by sigmoid(x_a + upsample(f1(pool(x_a)))),
/// run it through f2 then f3, run the second half through f4, concat,
/// PReLU.
pub fn sc_block_reference(x: &Tensor, p: &crate::scconv::ScBlockParams) -> Result<Tensor> {
    let s = x.shape();
    if s.c != p.half * 2 {
        return Err(Error::InvalidArgument {
            op: "sc_block_reference",
            detail: format!("input has {} channels, block expects {}", s.c, p.half * 2),
        });
    }
    let half = p.half;
    let xa = Tensor::from_fn(Shape::new(s.n, half, s.h, s.w), |n, c, i, j| x.at(n, c, i, j));
    let xb = Tensor::from_fn(Shape::new(s.n, half, s.h, s.w), |n, c, i, j| x.at(n, c + half, i, j));

    let pooled = avg_pool2d_reference(&xa, p.r_pool)?;
    let calib = conv2d_reference(&pooled, &p.f1.weight.value, Some(&p.f1.bias.value), 1, 1)?;
    let spread = upsample_bilinear_reference(&calib, p.r_pool)?;
    let gate = Tensor::from_fn(xa.shape(), |n, c, i, j| {
        let v = xa.at(n, c, i, j) + spread.at(n, c, i, j);
        1.0 / (1.0 + (-v).exp())
    });
    let feat = conv2d_reference(&xa, &p.f2.weight.value, Some(&p.f2.bias.value), 1, 1)?;
    let gated = Tensor::from_fn(feat.shape(), |n, c, i, j| feat.at(n, c, i, j) * gate.at(n, c, i, j));
    let mid = conv2d_reference(&gated, &p.f3.weight.value, Some(&p.f3.bias.value), 1, 1)?;
    let yb = conv2d_reference(&xb, &p.f4.weight.value, Some(&p.f4.bias.value), 1, 1)?;

    let slope = p.slope.value.value()?;
    Ok(Tensor::from_fn(s, |n, c, i, j| {
        let v = if c < half { mid.at(n, c, i, j) } else { yb.at(n, c - half, i, j) };
        if v >= 0.0 {
            v
        } else {
            slope * v
        }
    }))
}

/// Central finite difference of `f` along coordinate `k`: the classic
/// (f(x + h e_k) - f(x - h e_k)) / 2h, evaluated in f64.
pub fn central_difference(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x: &[f64],
    k: usize,
    h: f64,
) -> Result<f64> {
    let mut xs = x.to_vec();
    xs[k] = x[k] + h;
    let fp = f(&xs)?;
    xs[k] = x[k] - h;
    let fm = f(&xs)?;
    Ok((fp - fm) / (2.0 * h))
}

/// Step size used by every finite-difference check in the crate.
pub const FD_STEP: f64 = 1e-5;

/// Relative tolerance the gradient suite enforces.
pub const FD_REL_TOL: f64 = 1e-4;

/// Outcome of comparing an analytic gradient against finite differences.
#[derive(Debug, Clone)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub worst_coord: usize,
    pub coords: usize,
    /// Coordinates excluded because the probe interval crosses an
    /// activation kink (see [`fd_estimate`]).
    pub skipped: usize,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= FD_REL_TOL
    }
}

/// Relative error with a floor so near-zero gradients compare absolutely.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central-difference estimate at step `h` and `h/2`. A function that
/// is smooth across the probe interval yields two estimates that agree
/// to O(h^2); when the interval straddles a piecewise-linear activation
/// kink (prelu, leaky-relu) the estimates blend the two one-sided
/// slopes with different weights and disagree at first order. In that
/// case no finite difference approximates the one-sided derivative the
/// backward pass computes, so `None` is returned and the caller skips
/// the coordinate rather than comparing noise.
pub fn fd_estimate(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x: &[f64],
    k: usize,
) -> Result<Option<f64>> {
    let full = central_difference(f, x, k, FD_STEP)?;
    let half = central_difference(f, x, k, FD_STEP / 2.0)?;
    if relative_error(full, half) > FD_REL_TOL {
        return Ok(None);
    }
    Ok(Some(half))
}

/// Checks `analytic` against central differences of `f` at `x`,
/// coordinate by coordinate. Kink-straddling coordinates are counted
/// in `skipped` instead of compared.
pub fn check_gradient(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x: &[f64],
    analytic: &[f64],
) -> Result<FdReport> {
    assert_eq!(x.len(), analytic.len(), "gradient length must match input length");
    let mut report = FdReport { max_rel_err: 0.0, worst_coord: 0, coords: x.len(), skipped: 0 };
    for k in 0..x.len() {
        let numeric = match fd_estimate(f, x, k)? {
            Some(v) => v,
            None => {
                report.skipped += 1;
                continue;
            }
        };
        let rel = relative_error(analytic[k], numeric);
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_coord = k;
        }
    }
    Ok(report)
}

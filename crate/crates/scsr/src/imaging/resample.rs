//! Separable Catmull-Rom resampling with antialiasing.
//!
//! Sample positions follow the half-pixel convention
//! `src = (dst + 0.5) * ratio - 0.5`. When downscaling, the kernel is
//! widened by the scale ratio so it acts as a low-pass filter. Borders
//! reflect about the half-sample boundary, and each output position's
//! weights are renormalized to sum to one, so constants pass through
//! unchanged and same-size resampling is the identity.

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::tensor::{Shape, Tensor};

/// Catmull-Rom kernel (cubic with a = -1/2), support [-2, 2].
fn kernel(t: f64) -> f64 {
    let a = -0.5;
    let t = t.abs();
    if t < 1.0 {
        (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * (t * t * t - 5.0 * t * t + 8.0 * t - 4.0)
    } else {
        0.0
    }
}

/// Reflects an out-of-range index about the half-sample borders, so
/// index -1 maps to 0 and index n maps to n - 1.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

/// Filter taps for one axis: for each output index, the first source
/// index covered and the normalized weights across the window.
struct AxisTaps {
    start: isize,
    weights: Vec<f64>,
}

fn axis_taps(src_n: usize, dst_n: usize) -> Vec<AxisTaps> {
    let ratio = src_n as f64 / dst_n as f64;
    let scale = ratio.max(1.0);
    let support = 2.0 * scale;
    (0..dst_n)
        .map(|o| {
            let center = (o as f64 + 0.5) * ratio - 0.5;
            let lo = (center - support).ceil() as isize;
            let hi = (center + support).floor() as isize;
            let mut weights: Vec<f64> = (lo..=hi).map(|i| kernel((center - i as f64) / scale)).collect();
            let sum: f64 = weights.iter().sum();
            if sum.abs() > 1e-12 {
                for w in &mut weights {
                    *w /= sum;
                }
            }
            AxisTaps { start: lo, weights }
        })
        .collect()
}

/// Resamples every plane of an NxCxHxW tensor to `out_h` x `out_w`.
/// Values are not clamped; use [`bicubic_resize`] for images.
pub fn resample_tensor(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let s = x.shape();
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument {
            op: "resample",
            detail: format!("degenerate output {out_h}x{out_w}"),
        });
    }
    let col_taps = axis_taps(s.w, out_w);
    let row_taps = axis_taps(s.h, out_h);
    // Horizontal pass: H x out_w intermediate per plane, then vertical.
    let mut out = vec![0.0; s.n * s.c * out_h * out_w];
    let mut mid = vec![0.0; s.h * out_w];
    let data = x.data();
    for n in 0..s.n {
        for c in 0..s.c {
            let plane = &data[((n * s.c + c) * s.h) * s.w..((n * s.c + c) * s.h + s.h) * s.w];
            for i in 0..s.h {
                for (o, t) in col_taps.iter().enumerate() {
                    let mut acc = 0.0;
                    for (k, w) in t.weights.iter().enumerate() {
                        acc += w * plane[i * s.w + reflect(t.start + k as isize, s.w)];
                    }
                    mid[i * out_w + o] = acc;
                }
            }
            for (oi, t) in row_taps.iter().enumerate() {
                for oj in 0..out_w {
                    let mut acc = 0.0;
                    for (k, w) in t.weights.iter().enumerate() {
                        acc += w * mid[reflect(t.start + k as isize, s.h) * out_w + oj];
                    }
                    out[((n * s.c + c) * out_h + oi) * out_w + oj] = acc;
                }
            }
        }
    }
    Tensor::new(Shape::new(s.n, s.c, out_h, out_w), out)
}

/// Resizes an image with the Catmull-Rom resampler and clamps the
/// result back into [0, 1].
pub fn bicubic_resize(img: &Image, out_w: usize, out_h: usize) -> Result<Image> {
    let t = resample_tensor(&img.to_tensor(), out_h, out_w)?;
    Image::from_tensor(&t)
}

//! Reconstruction quality metrics: MSE, PSNR, SSIM, and the
//! image-level conventions (channel choice, border crop) that published
//! evaluation tables quietly disagree on.

pub mod report;

pub use report::{evaluate_corpus, pair_rows, MetricReport, MetricRow};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::tensor::Tensor;

/// Side length of the SSIM window.
pub const SSIM_WINDOW: usize = 11;
/// Standard deviation of the SSIM window.
pub const SSIM_SIGMA: f64 = 1.5;
/// (0.01 * L)^2 with L = 1 for unit-range images.
pub const SSIM_C1: f64 = 1e-4;
/// (0.03 * L)^2. Stabilizes the contrast factor; the luminance factor
/// uses C1 only.
pub const SSIM_C2: f64 = 9e-4;

/// Which plane the metrics are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// All three planes, averaged.
    Rgb,
    /// BT.601 studio-swing luma only.
    Luma,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Rgb => "rgb",
            Channel::Luma => "luma",
        })
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb" => Ok(Channel::Rgb),
            "luma" => Ok(Channel::Luma),
            other => Err(Error::Metric(format!("unknown channel `{other}` (expected rgb or luma)"))),
        }
    }
}

/// Evaluation convention switches. Defaults match the plain reading of
/// the formulas: all channels, no crop, windowed SSIM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricConfig {
    pub channel: Channel,
    /// Pixels to strip from every side of both images first.
    pub border_crop: usize,
    /// Treat the whole image as one uniform SSIM window instead of
    /// sliding the Gaussian one.
    pub global_window: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { channel: Channel::Rgb, border_crop: 0, global_window: false }
    }
}

/// PSNR with an explicit sentinel for identical inputs, which would
/// otherwise be a silent infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    /// Value in dB; the sentinel maps to +inf so arithmetic-mean
    /// aggregates stay honest.
    pub fn db(self) -> f64 {
        match self {
            Psnr::Finite(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Psnr::Infinite)
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v:.6}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

/// Mean squared difference over every element.
pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Metric(format!("mse inputs differ: {} vs {}", a.shape(), b.shape())));
    }
    let n = a.len() as f64;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / n)
}

/// 10 * log10(1 / MSE) for unit-peak signals.
pub fn psnr_from_mse(m: f64) -> Psnr {
    if m <= 0.0 {
        Psnr::Infinite
    } else {
        Psnr::Finite(10.0 * (1.0 / m).log10())
    }
}

pub fn psnr(a: &Tensor, b: &Tensor) -> Result<Psnr> {
    Ok(psnr_from_mse(mse(a, b)?))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let mid = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - mid;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Valid-mode separable blur: horizontal then vertical pass, output
/// (h - win + 1) x (w - win + 1).
fn blur_valid(src: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut mid = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * src[i * w + j + t];
            }
            mid[i * ow + j] = acc;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * mid[(i + t) * ow + j];
            }
            out[i * ow + j] = acc;
        }
    }
    out
}

fn ssim_term(mx: f64, my: f64, sxx: f64, syy: f64, sxy: f64) -> f64 {
    let vx = sxx - mx * mx;
    let vy = syy - my * my;
    let cov = sxy - mx * my;
    ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2)) / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2))
}

/// Mean structural similarity over channels. Windowed mode slides an
/// 11x11 Gaussian over every fully interior position; global mode uses
/// one uniform window spanning the whole plane.
pub fn ssim(a: &Tensor, b: &Tensor, global_window: bool) -> Result<f64> {
    let s = a.shape();
    if s != b.shape() {
        return Err(Error::Metric(format!("ssim inputs differ: {s} vs {}", b.shape())));
    }
    if !global_window && (s.h < SSIM_WINDOW || s.w < SSIM_WINDOW) {
        return Err(Error::Metric(format!(
            "image {}x{} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} ssim window",
            s.h, s.w
        )));
    }
    let plane = s.h * s.w;
    let k = gaussian_window();
    let mut total = 0.0;
    let mut planes = 0usize;
    for n in 0..s.n {
        for c in 0..s.c {
            let off = (n * s.c + c) * plane;
            let x = &a.data()[off..off + plane];
            let y = &b.data()[off..off + plane];
            if global_window {
                let inv = 1.0 / plane as f64;
                let mut mx = 0.0;
                let mut my = 0.0;
                let mut sxx = 0.0;
                let mut syy = 0.0;
                let mut sxy = 0.0;
                for (xv, yv) in x.iter().zip(y) {
                    mx += xv;
                    my += yv;
                    sxx += xv * xv;
                    syy += yv * yv;
                    sxy += xv * yv;
                }
                total += ssim_term(mx * inv, my * inv, sxx * inv, syy * inv, sxy * inv);
            } else {
                let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
                let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
                let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
                let mxs = blur_valid(x, s.h, s.w, &k);
                let mys = blur_valid(y, s.h, s.w, &k);
                let sxxs = blur_valid(&xx, s.h, s.w, &k);
                let syys = blur_valid(&yy, s.h, s.w, &k);
                let sxys = blur_valid(&xy, s.h, s.w, &k);
                let mut acc = 0.0;
                for i in 0..mxs.len() {
                    acc += ssim_term(mxs[i], mys[i], sxxs[i], syys[i], sxys[i]);
                }
                total += acc / mxs.len() as f64;
            }
            planes += 1;
        }
    }
    Ok(total / planes as f64)
}

fn cropped(img: &Image, border: usize) -> Result<Image> {
    if border == 0 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    if 2 * border >= w || 2 * border >= h {
        return Err(Error::Metric(format!(
            "border crop {border} leaves nothing of a {w}x{h} image"
        )));
    }
    img.crop(border, border, w - 2 * border, h - 2 * border)
}

/// PSNR and SSIM for one image pair under a convention config.
pub fn image_metrics(sr: &Image, hr: &Image, cfg: &MetricConfig) -> Result<(Psnr, f64)> {
    if sr.width() != hr.width() || sr.height() != hr.height() {
        return Err(Error::Metric(format!(
            "image sizes differ: {}x{} vs {}x{}",
            sr.width(),
            sr.height(),
            hr.width(),
            hr.height()
        )));
    }
    let a = cropped(sr, cfg.border_crop)?;
    let b = cropped(hr, cfg.border_crop)?;
    let (ta, tb) = match cfg.channel {
        Channel::Rgb => (a.to_tensor(), b.to_tensor()),
        Channel::Luma => (a.to_luma_tensor(), b.to_luma_tensor()),
    };
    Ok((psnr(&ta, &tb)?, ssim(&ta, &tb, cfg.global_window)?))
}

//! Images and the degradation pipeline: file I/O, Catmull-Rom
//! resampling, crops, LR/HR training pairs, and the synthetic corpus
//! the tests train on.

mod degrade;
mod io;
mod resample;
mod synthetic;

pub use degrade::{make_pair, random_crop, TrainPair};
pub use io::{load_image, read_manifest, save_image, write_manifest};
pub use resample::{bicubic_resize, resample_tensor};
pub use synthetic::{synthetic_corpus, synthetic_corpus_images, synthetic_image, SyntheticKind};

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// An RGB image with f64 samples in [0, 1], interleaved row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image(format!("degenerate dimensions {width}x{height}")));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Image(format!(
                "{width}x{height} RGB wants {} samples, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Image { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Image { width, height, data }
    }

    /// Builds an image by evaluating `f` at each (x, y).
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Image { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Axis-aligned crop. The window must lie inside the image.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Image> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(Error::Image(format!(
                "crop {w}x{h}+{x}+{y} outside {}x{}",
                self.width, self.height
            )));
        }
        Ok(Image::from_fn(w, h, |cx, cy| self.pixel(x + cx, y + cy)))
    }

    /// 1x3xHxW tensor view of the image, channels planar.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_fn(Shape::new(1, 3, self.height, self.width), |_, c, i, j| {
            self.data[(i * self.width + j) * 3 + c]
        })
    }

    /// Image from a 1x3xHxW tensor, clamping into [0, 1].
    pub fn from_tensor(t: &Tensor) -> Result<Image> {
        let s = t.shape();
        if s.n != 1 || s.c != 3 {
            return Err(Error::Image(format!("expected 1x3xHxW tensor, got {s}")));
        }
        Ok(Image::from_fn(s.w, s.h, |x, y| {
            [
                t.at(0, 0, y, x).clamp(0.0, 1.0),
                t.at(0, 1, y, x).clamp(0.0, 1.0),
                t.at(0, 2, y, x).clamp(0.0, 1.0),
            ]
        }))
    }

    /// 1x1xHxW luma plane using the BT.601 studio-swing transform
    /// (the classic rgb2ycbcr Y channel, scaled back into [0, 1]).
    pub fn to_luma_tensor(&self) -> Tensor {
        Tensor::from_fn(Shape::new(1, 1, self.height, self.width), |_, _, i, j| {
            let [r, g, b] = self.pixel(j, i);
            (16.0 + 65.481 * r + 128.553 * g + 24.966 * b) / 255.0
        })
    }

    /// Largest absolute per-sample difference.
    pub fn max_abs_diff(&self, other: &Image) -> Result<f64> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Image(format!(
                "size mismatch {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

//! Degradation pipeline: HR crops paired with bicubic-downscaled LR
//! inputs. All randomness comes from the caller's seeded generator.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, Image};

/// One training example: the LR input and its HR ground truth.
#[derive(Clone, Debug)]
pub struct TrainPair {
    pub lr: Image,
    pub hr: Image,
}

/// Takes a square crop at a uniformly random valid position. Returns
/// the crop and its (x, y) origin.
pub fn random_crop(img: &Image, size: usize, rng: &mut ChaCha12Rng) -> Result<(Image, (usize, usize))> {
    if size == 0 || size > img.width() || size > img.height() {
        return Err(Error::Image(format!(
            "crop {size} does not fit in {}x{}",
            img.width(),
            img.height()
        )));
    }
    let x = rng.random_range(0..=img.width() - size);
    let y = rng.random_range(0..=img.height() - size);
    Ok((img.crop(x, y, size, size)?, (x, y)))
}

/// Crops an HR patch of `crop_size` and synthesizes its LR counterpart
/// by bicubic downscaling at `scale`. `crop_size` must be a multiple
/// of `scale` so the LR patch has integer dimensions.
pub fn make_pair(img: &Image, crop_size: usize, scale: usize, rng: &mut ChaCha12Rng) -> Result<TrainPair> {
    if scale == 0 || crop_size % scale != 0 {
        return Err(Error::Image(format!(
            "crop size {crop_size} is not a multiple of scale {scale}"
        )));
    }
    let (hr, _) = random_crop(img, crop_size, rng)?;
    let lr_size = crop_size / scale;
    let lr = bicubic_resize(&hr, lr_size, lr_size)?;
    Ok(TrainPair { lr, hr })
}

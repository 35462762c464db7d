//! Single-image super-resolution with self-calibrated convolutions,
//! trained as a GAN with an adaptive robust content loss.
//!
//! The crate is self-contained: a small NCHW tensor core with
//! reverse-mode autodiff, an imaging pipeline (PNG/PPM I/O, Catmull-Rom
//! resampling, degradation pairs), the self-calibrated generator and a
//! patch discriminator, the four training losses, PSNR/SSIM metrics,
//! an RMSprop training loop, and reference implementations that every
//! fast path is verified against.
//!
//! A rendered guide with worked examples lives in `book/`; its code
//! snippets compile and run as doctests of this crate.

pub mod config;
pub mod error;
pub mod imaging;
pub mod losses;
pub mod metrics;
pub mod networks;
pub mod rng;
pub mod scconv;
pub mod tensor;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::tape::{Gradients, Parameter, Tape, Var};
pub use tensor::{Shape, Tensor};

/// Compiles and runs every code block in the guide (`book/src/*.md`)
/// as doctests, so the book can never drift from the library.
#[cfg(doctest)]
mod booktests {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/tensors-and-autodiff.md")]
    pub struct TensorsAndAutodiff;
    #[doc = include_str!("../../../book/src/images-and-degradation.md")]
    pub struct ImagesAndDegradation;
    #[doc = include_str!("../../../book/src/self-calibrated-convolution.md")]
    pub struct SelfCalibratedConvolution;
    #[doc = include_str!("../../../book/src/generator-and-discriminator.md")]
    pub struct GeneratorAndDiscriminator;
    #[doc = include_str!("../../../book/src/loss-functions.md")]
    pub struct LossFunctions;
    #[doc = include_str!("../../../book/src/quality-metrics.md")]
    pub struct QualityMetrics;
    #[doc = include_str!("../../../book/src/training.md")]
    pub struct Training;
    #[doc = include_str!("../../../book/src/command-line-tools.md")]
    pub struct CommandLineTools;
    #[doc = include_str!("../../../book/src/verification.md")]
    pub struct Verification;
}

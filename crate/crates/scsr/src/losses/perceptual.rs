//! Feature-space reconstruction loss.
//!
//! Instead of a pretrained classifier backbone (an external artifact
//! this crate cannot ship), features come from a small frozen conv
//! stack whose weights are drawn once from a seed. The loss is the
//! mean squared difference between feature maps at a tap layer, which
//! preserves the structure of a deep-feature MSE while staying fully
//! reproducible. Externally supplied weights can be plugged in through
//! [`FeatureExtractor::from_weights`].

use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::tape::{Tape, Var};
use crate::tensor::{Shape, Tensor};

/// Channel widths through the stack: input, then one entry per conv.
pub const EXTRACTOR_CHANNELS: [usize; 5] = [3, 16, 32, 64, 64];
/// Convs followed by a 2x average pool (after the first and second).
const POOL_AFTER: [bool; 4] = [true, true, false, false];
/// Feature tap: after the ReLU of this conv (1-based).
pub const DEFAULT_TAP: usize = 3;

/// Frozen convolutional feature stack: 3x3 convs with ReLU, average
/// pooling after the first two stages.
pub struct FeatureExtractor {
    layers: Vec<(Tensor, Tensor)>,
    tap: usize,
}

impl FeatureExtractor {
    /// Draws the frozen weights from `seed` (fan-in scaled normals,
    /// zero biases). The same seed always yields the same extractor.
    pub fn seeded(seed: u64) -> Self {
        let layers = (0..4)
            .map(|i| {
                let (cin, cout) = (EXTRACTOR_CHANNELS[i], EXTRACTOR_CHANNELS[i + 1]);
                let mut r = rng::seeded(rng::derive(seed, &format!("extractor.conv{}", i + 1)));
                let std = (2.0 / (cin * 9) as f64).sqrt();
                let w = Tensor::from_fn(Shape::new(cout, cin, 3, 3), |_, _, _, _| {
                    let z: f64 = rand_distr::StandardNormal.sample(&mut r);
                    z * std
                });
                (w, Tensor::zeros(Shape::new(1, cout, 1, 1)))
            })
            .collect();
        FeatureExtractor { layers, tap: DEFAULT_TAP }
    }

    /// Wraps externally supplied weights. Each layer is (weight, bias)
    /// with weight [c_out, c_in, 3, 3] following the fixed widths.
    pub fn from_weights(layers: Vec<(Tensor, Tensor)>) -> Result<Self> {
        if layers.len() != 4 {
            return Err(Error::InvalidArgument {
                op: "feature_extractor",
                detail: format!("expected 4 layers, got {}", layers.len()),
            });
        }
        for (i, (w, b)) in layers.iter().enumerate() {
            let want = Shape::new(EXTRACTOR_CHANNELS[i + 1], EXTRACTOR_CHANNELS[i], 3, 3);
            if w.shape() != want {
                return Err(Error::ShapeMismatch {
                    op: "feature_extractor",
                    detail: format!("layer {} weight {} (want {want})", i + 1, w.shape()),
                });
            }
            let want_b = Shape::new(1, EXTRACTOR_CHANNELS[i + 1], 1, 1);
            if b.shape() != want_b {
                return Err(Error::ShapeMismatch {
                    op: "feature_extractor",
                    detail: format!("layer {} bias {} (want {want_b})", i + 1, b.shape()),
                });
            }
        }
        Ok(FeatureExtractor { layers, tap: DEFAULT_TAP })
    }

    /// Runs the stack up to the tap layer. Weights enter the tape as
    /// constants, so gradients flow through to `x` but never into the
    /// extractor.
    pub fn features(&self, tape: &Tape, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, (w, b)) in self.layers.iter().enumerate().take(self.tap) {
            let wv = tape.leaf(w.clone());
            let bv = tape.leaf(b.clone());
            h = tape.conv2d(h, wv, Some(bv), 1, 1)?;
            h = tape.relu(h)?;
            if POOL_AFTER[i] {
                h = tape.avg_pool2d(h, 2)?;
            }
        }
        Ok(h)
    }
}

/// Mean squared difference between tap-layer feature maps of `sr`
/// and `hr`.
pub fn perceptual_loss(tape: &Tape, sr: Var, hr: Var, fe: &FeatureExtractor) -> Result<Var> {
    let (ss, hs) = (tape.shape(sr), tape.shape(hr));
    if ss != hs {
        return Err(Error::ShapeMismatch {
            op: "perceptual_loss",
            detail: format!("{ss} vs {hs}"),
        });
    }
    let fs = fe.features(tape, sr)?;
    let fh = fe.features(tape, hr)?;
    let d = tape.sub(fs, fh)?;
    let sq = tape.mul(d, d)?;
    tape.mean_all(sq)
}

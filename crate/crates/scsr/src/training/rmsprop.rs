//! RMSprop with per-parameter squared-gradient accumulators.
//!
//! Master weights are quantized to f32 precision after every update
//! (matching the quantization applied at init), so a checkpoint saved
//! as f32 restores training state bit for bit.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::tape::{Gradients, ParamBundle};
use crate::tensor::Tensor;

pub struct RmsProp {
    decay: f64,
    eps: f64,
    /// Squared-gradient running average, keyed by parameter name.
    state: HashMap<String, Vec<f64>>,
}

impl RmsProp {
    pub fn new(decay: f64, eps: f64) -> Result<Self> {
        if !(0.0 < decay && decay < 1.0) {
            return Err(Error::InvalidArgument {
                op: "rmsprop",
                detail: format!("decay must be in (0,1), got {decay}"),
            });
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument {
                op: "rmsprop",
                detail: format!("eps must be finite and >= 0, got {eps}"),
            });
        }
        Ok(RmsProp { decay, eps, state: HashMap::new() })
    }

    /// s <- decay*s + (1-decay)*g^2; p <- p - lr*g/(sqrt(s) + eps).
    /// Learnable parameters absent from `grads` are left unchanged
    /// while their state decays toward zero.
    pub fn step(&mut self, bundle: &mut impl ParamBundle, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument {
                op: "rmsprop_step",
                detail: format!("lr must be finite and > 0, got {lr}"),
            });
        }
        for p in bundle.params_mut() {
            if !p.learnable {
                continue;
            }
            let n = p.value.len();
            let s = self.state.entry(p.name.clone()).or_insert_with(|| vec![0.0; n]);
            if s.len() != n {
                return Err(Error::ShapeMismatch {
                    op: "rmsprop_step",
                    detail: format!("state for `{}` has {} entries, parameter has {n}", p.name, s.len()),
                });
            }
            let Some(g) = grads.get(&p.name) else {
                for si in s.iter_mut() {
                    *si *= self.decay;
                }
                continue;
            };
            if g.shape() != p.value.shape() {
                return Err(Error::ShapeMismatch {
                    op: "rmsprop_step",
                    detail: format!("gradient {} vs parameter {} for `{}`", g.shape(), p.value.shape(), p.name),
                });
            }
            let mut v = p.value.data().to_vec();
            for i in 0..n {
                let gi = g.data()[i];
                if !gi.is_finite() {
                    return Err(Error::NonFinite { op: "rmsprop_step" });
                }
                s[i] = self.decay * s[i] + (1.0 - self.decay) * gi * gi;
                if gi != 0.0 {
                    v[i] = (v[i] - lr * gi / (s[i].sqrt() + self.eps)) as f32 as f64;
                }
            }
            p.value = Tensor::new(p.value.shape(), v)?;
        }
        Ok(())
    }
}

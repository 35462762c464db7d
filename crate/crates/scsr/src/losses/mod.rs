//! Training objectives: adaptive robust pixel penalty, adversarial
//! pair, frozen-extractor feature loss, and total-variation smoothing,
//! combined into one weighted generator objective.

mod adversarial;
mod perceptual;
mod robust;
mod tv;

pub use adversarial::{adversarial_d_loss, adversarial_g_loss, SCORE_EPS};
pub use perceptual::{perceptual_loss, FeatureExtractor, DEFAULT_TAP, EXTRACTOR_CHANNELS};
pub use robust::{
    constrain, robust_elementwise, robust_loss_mean, robust_value, RobustLossParams, ALPHA_HI,
    ALPHA_LO, C_FLOOR,
};
pub use tv::tv_loss;

use crate::error::{Error, Result};
use crate::tensor::tape::{Tape, Var};
use crate::verify::suites::{fd_case, CheckOutcome};

/// Relative weight of each generator loss term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub adversarial: f64,
    pub robust: f64,
    pub perceptual: f64,
    pub tv: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        // The adversarial and pixel terms are orders of magnitude
        // apart in raw scale; these ratios keep them balanced.
        LossWeights {
            adversarial: 1e-3,
            robust: 1.0,
            perceptual: 6e-3,
            tv: 2e-8,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("adversarial", self.adversarial),
            ("robust", self.robust),
            ("perceptual", self.perceptual),
            ("tv", self.tv),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument {
                    op: "loss_weights",
                    detail: format!("weight {name} = {v} must be finite and non-negative"),
                });
            }
        }
        Ok(())
    }
}

/// The four scalar loss terms of one generator step, pre-weighting.
#[derive(Clone, Copy, Debug)]
pub struct LossParts {
    pub adversarial: Var,
    pub robust: Var,
    pub perceptual: Var,
    pub tv: Var,
}

/// Raw per-term values and the weighted total, for logging.
#[derive(Clone, Copy, Debug)]
pub struct LossBreakdown {
    pub adversarial: f64,
    pub robust: f64,
    pub perceptual: f64,
    pub tv: f64,
    pub total: f64,
}

/// Weighted sum of the four terms. Returns the differentiable total
/// and a plain-number breakdown of the unweighted parts.
pub fn total_generator_loss(tape: &Tape, parts: &LossParts, w: &LossWeights) -> Result<(Var, LossBreakdown)> {
    w.validate()?;
    let wa = tape.affine(parts.adversarial, w.adversarial, 0.0)?;
    let wr = tape.affine(parts.robust, w.robust, 0.0)?;
    let wp = tape.affine(parts.perceptual, w.perceptual, 0.0)?;
    let wt = tape.affine(parts.tv, w.tv, 0.0)?;
    let total = tape.add(tape.add(tape.add(wa, wr)?, wp)?, wt)?;
    let breakdown = LossBreakdown {
        adversarial: tape.value(parts.adversarial).value()?,
        robust: tape.value(parts.robust).value()?,
        perceptual: tape.value(parts.perceptual).value()?,
        tv: tape.value(parts.tv).value()?,
        total: tape.value(total).value()?,
    };
    Ok((total, breakdown))
}

/// Mean squared pixel error: the ablation stand-in for the robust
/// term, sharing its plumbing.
pub fn pixel_mse(tape: &Tape, pred: Var, target: Var) -> Result<Var> {
    let d = tape.sub(pred, target)?;
    let sq = tape.mul(d, d)?;
    tape.mean_all(sq)
}

/// Finite-difference checks for every loss, including the gradients
/// that flow through the robust loss's shape/scale reparameterization.
pub fn gradient_check_cases(seed: u64, cases: usize) -> Vec<CheckOutcome> {
    use crate::rng::derive;
    use crate::tensor::Shape;
    let mut out = Vec::new();
    out.push(fd_case(
        "robust loss (x, raw alpha, raw c)",
        derive(seed, "l_robust"),
        cases,
        &[
            ("x", Shape::new(1, 1, 3, 4), -1.0, 1.0),
            // Raw values map to alpha in ~(0.36, 1.64) and c in
            // ~(0.2, 1.7): well clear of the limit branches.
            ("alpha_raw", Shape::scalar(), -1.5, 1.5),
            ("c_raw", Shape::scalar(), -1.5, 1.5),
        ],
        |t, v| {
            let (alpha, c) = constrain(t, v[1], v[2])?;
            let f = robust_elementwise(t, v[0], alpha, c)?;
            t.mean_all(f)
        },
    ));
    out.push(fd_case(
        "adversarial generator loss (scores)",
        derive(seed, "l_adv_g"),
        cases,
        &[("logits", Shape::new(4, 1, 1, 1), -2.0, 2.0)],
        |t, v| {
            let scores = t.sigmoid(v[0])?;
            adversarial_g_loss(t, scores)
        },
    ));
    out.push(fd_case(
        "adversarial discriminator loss (real, fake)",
        derive(seed, "l_adv_d"),
        cases,
        &[
            ("real_logits", Shape::new(3, 1, 1, 1), -2.0, 2.0),
            ("fake_logits", Shape::new(3, 1, 1, 1), -2.0, 2.0),
        ],
        |t, v| {
            let real = t.sigmoid(v[0])?;
            let fake = t.sigmoid(v[1])?;
            adversarial_d_loss(t, real, fake)
        },
    ));
    out.push(fd_case(
        "tv loss (x)",
        derive(seed, "l_tv"),
        cases,
        &[("x", Shape::new(1, 2, 4, 5), 0.0, 1.0)],
        |t, v| tv_loss(t, v[0]),
    ));
    let fe = FeatureExtractor::seeded(derive(seed, "l_perceptual_fe"));
    out.push(fd_case(
        "perceptual loss (sr, hr)",
        derive(seed, "l_perceptual"),
        cases,
        &[
            ("sr", Shape::new(1, 3, 8, 8), 0.0, 1.0),
            ("hr", Shape::new(1, 3, 8, 8), 0.0, 1.0),
        ],
        |t, v| perceptual_loss(t, v[0], v[1], &fe),
    ));
    let fe2 = FeatureExtractor::seeded(derive(seed, "l_total_fe"));
    out.push(fd_case(
        "total generator objective (pred, hr, logits)",
        derive(seed, "l_total"),
        cases,
        &[
            ("pred", Shape::new(1, 3, 8, 8), 0.05, 0.95),
            ("hr", Shape::new(1, 3, 8, 8), 0.05, 0.95),
            ("logits", Shape::new(1, 1, 1, 1), -2.0, 2.0),
            ("alpha_raw", Shape::scalar(), -1.0, 1.0),
            ("c_raw", Shape::scalar(), -1.0, 1.0),
        ],
        |t, v| {
            let scores = t.sigmoid(v[2])?;
            let adv = adversarial_g_loss(t, scores)?;
            let (alpha, c) = constrain(t, v[3], v[4])?;
            let r = t.sub(v[0], v[1])?;
            let robust = t.mean_all(robust_elementwise(t, r, alpha, c)?)?;
            let perc = perceptual_loss(t, v[0], v[1], &fe2)?;
            let tv = tv_loss(t, v[0])?;
            let parts = LossParts { adversarial: adv, robust, perceptual: perc, tv };
            let (total, _) = total_generator_loss(t, &parts, &LossWeights::default())?;
            Ok(total)
        },
    ));
    out
}

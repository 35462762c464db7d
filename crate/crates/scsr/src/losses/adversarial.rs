//! Minimax GAN objectives over discriminator probabilities.
//!
//! Scores are clamped to `[1e-7, 1 - 1e-7]` before any logarithm, so
//! both losses stay finite even when the discriminator saturates at
//! exactly 0 or 1.

use crate::error::Result;
use crate::tensor::tape::{Tape, Var};

pub const SCORE_EPS: f64 = 1e-7;

fn clamped_ln(tape: &Tape, scores: Var) -> Result<Var> {
    let safe = tape.clamp(scores, SCORE_EPS, 1.0 - SCORE_EPS)?;
    tape.ln(safe)
}

fn clamped_ln_one_minus(tape: &Tape, scores: Var) -> Result<Var> {
    // 1 - D via affine, then the same guarded log.
    let flipped = tape.affine(scores, -1.0, 1.0)?;
    clamped_ln(tape, flipped)
}

/// Generator objective: mean log(1 - D(fake)). Driving D(fake) toward
/// 1 makes this more negative, so G minimizes it.
pub fn adversarial_g_loss(tape: &Tape, d_fake: Var) -> Result<Var> {
    let l = clamped_ln_one_minus(tape, d_fake)?;
    tape.mean_all(l)
}

/// Discriminator objective: -[mean log D(real) + mean log(1 - D(fake))].
pub fn adversarial_d_loss(tape: &Tape, d_real: Var, d_fake: Var) -> Result<Var> {
    let real_term = tape.mean_all(clamped_ln(tape, d_real)?)?;
    let fake_term = tape.mean_all(clamped_ln_one_minus(tape, d_fake)?)?;
    let sum = tape.add(real_term, fake_term)?;
    tape.affine(sum, -1.0, 0.0)
}

//! General adaptive robust penalty with learnable shape and scale.
//!
//! The penalty on a residual x is
//!
//! ```text
//! f(x; alpha, c) = (|alpha - 2| / alpha) * (((x/c)^2 / |alpha - 2| + 1)^(alpha/2) - 1)
//! ```
//!
//! which sweeps from a scaled L2 at `alpha = 2` through pseudo-Huber at
//! `alpha = 1` toward heavier-tailed penalties as `alpha` drops. The
//! removable singularities get explicit branches: `|alpha| < 1e-4`
//! evaluates the log limit `log(0.5 (x/c)^2 + 1)` and `|alpha - 2| <
//! 1e-4` the quadratic limit `0.5 (x/c)^2`.
//!
//! Both knobs train by gradient descent through smooth
//! reparameterizations: `alpha = lo + (hi - lo) * sigmoid(theta_a)`
//! keeps the shape inside `(lo, hi)` and `c = softplus(theta_c) + 1e-5`
//! keeps the scale positive.

use crate::error::{Error, Result};
use crate::tensor::ops;
use crate::tensor::tape::{ParamBundle, Parameter, Tape, Var};
use crate::tensor::Tensor;

pub const ALPHA_LO: f64 = 0.001;
pub const ALPHA_HI: f64 = 2.0;
pub const C_FLOOR: f64 = 1e-5;
const BRANCH_EPS: f64 = 1e-4;

/// Scalar penalty value. Pure math used by both the tape op and tests.
pub fn robust_value(x: f64, alpha: f64, c: f64) -> f64 {
    let s = (x / c) * (x / c);
    if alpha.abs() < BRANCH_EPS {
        (0.5 * s + 1.0).ln()
    } else if (alpha - 2.0).abs() < BRANCH_EPS {
        0.5 * s
    } else {
        let b = (alpha - 2.0).abs();
        (b / alpha) * ((s / b + 1.0).powf(alpha / 2.0) - 1.0)
    }
}

/// Partial derivatives (df/dx, df/dalpha, df/dc). Inside a limit
/// branch the alpha partial is taken as 0 (the branch function is
/// constant in alpha), matching what finite differences see there.
fn robust_partials(x: f64, alpha: f64, c: f64) -> (f64, f64, f64) {
    let s = (x / c) * (x / c);
    if alpha.abs() < BRANCH_EPS {
        let d = 1.0 / (0.5 * s + 1.0);
        (d * x / (c * c), 0.0, -d * s / c)
    } else if (alpha - 2.0).abs() < BRANCH_EPS {
        (x / (c * c), 0.0, -s / c)
    } else {
        let b = (alpha - 2.0).abs();
        let sigma = if alpha > 2.0 { 1.0 } else { -1.0 };
        let t = s / b + 1.0;
        let tp = t.powf(alpha / 2.0 - 1.0);
        let df_dx = x / (c * c) * tp;
        let df_dc = -s / c * tp;
        let df_da = (sigma * alpha - b) / (alpha * alpha) * (t * tp - 1.0)
            + (b / alpha) * t * tp * (0.5 * t.ln() - sigma * alpha * s / (2.0 * b * b * t));
        (df_dx, df_da, df_dc)
    }
}

/// Elementwise penalty as a tape op: `x` is any tensor of residuals,
/// `alpha` and `c` are scalar vars. Gradients flow to all three.
pub fn robust_elementwise(tape: &Tape, x: Var, alpha: Var, c: Var) -> Result<Var> {
    let xv = tape.value(x);
    let av = tape.value(alpha);
    let cv = tape.value(c);
    if !av.shape().is_scalar() || !cv.shape().is_scalar() {
        return Err(Error::ShapeMismatch {
            op: "robust_loss",
            detail: format!("alpha {} and c {} must be scalars", av.shape(), cv.shape()),
        });
    }
    let a = av.value()?;
    let cval = cv.value()?;
    if cval <= 0.0 {
        return Err(Error::InvalidArgument {
            op: "robust_loss",
            detail: format!("scale c must be positive, got {cval}"),
        });
    }
    let shape = xv.shape();
    let out = Tensor::new(shape, xv.data().iter().map(|&v| robust_value(v, a, cval)).collect())?;
    let out = ops::ensure_finite("robust_loss", out)?;
    let x_data = xv.clone();
    Ok(tape.record_node(
        out,
        Box::new(move |g: &Tensor| {
            let mut gx = vec![0.0; x_data.len()];
            let mut ga = 0.0;
            let mut gc = 0.0;
            for (i, (&xi, &gi)) in x_data.data().iter().zip(g.data().iter()).enumerate() {
                let (dx, da, dc) = robust_partials(xi, a, cval);
                gx[i] = gi * dx;
                ga += gi * da;
                gc += gi * dc;
            }
            vec![
                (x.0, Tensor::new(shape, gx).unwrap()),
                (alpha.0, Tensor::scalar(ga)),
                (c.0, Tensor::scalar(gc)),
            ]
        }),
    ))
}

/// The two unconstrained scalars behind `alpha` and `c`.
#[derive(Debug)]
pub struct RobustLossParams {
    pub alpha_raw: Parameter,
    pub c_raw: Parameter,
}

impl RobustLossParams {
    /// Builds parameters whose constrained values start at
    /// `alpha_init` (inside the open shape range) and `c_init` > 1e-5.
    pub fn init(alpha_init: f64, c_init: f64) -> Result<Self> {
        if !(ALPHA_LO..ALPHA_HI).contains(&alpha_init) || alpha_init == ALPHA_LO {
            return Err(Error::InvalidArgument {
                op: "robust_loss",
                detail: format!("alpha init {alpha_init} outside ({ALPHA_LO}, {ALPHA_HI})"),
            });
        }
        if c_init <= C_FLOOR {
            return Err(Error::InvalidArgument {
                op: "robust_loss",
                detail: format!("c init {c_init} must exceed {C_FLOOR}"),
            });
        }
        // Invert the reparameterizations: logit for alpha, inverse
        // softplus ln(e^y - 1) for c.
        let p = (alpha_init - ALPHA_LO) / (ALPHA_HI - ALPHA_LO);
        let theta_a = (p / (1.0 - p)).ln();
        let y = c_init - C_FLOOR;
        let theta_c = y.exp_m1().ln();
        Ok(RobustLossParams {
            alpha_raw: Parameter::new("robust.alpha_raw", Tensor::scalar(theta_a)),
            c_raw: Parameter::new("robust.c_raw", Tensor::scalar(theta_c)),
        })
    }

    /// Current constrained shape value.
    pub fn alpha(&self) -> f64 {
        let raw = self.alpha_raw.value.value().expect("alpha_raw is scalar");
        ALPHA_LO + (ALPHA_HI - ALPHA_LO) * ops::sigmoid_scalar(raw)
    }

    /// Current constrained scale value.
    pub fn c(&self) -> f64 {
        let raw = self.c_raw.value.value().expect("c_raw is scalar");
        ops::softplus_scalar(raw) + C_FLOOR
    }

    /// Binds the raw parameters and applies the constraints on tape,
    /// returning (alpha, c) vars.
    pub fn bind_constrained(&self, tape: &Tape) -> Result<(Var, Var)> {
        let a_raw = tape.param(&self.alpha_raw);
        let c_raw = tape.param(&self.c_raw);
        constrain(tape, a_raw, c_raw)
    }
}

impl ParamBundle for RobustLossParams {
    fn params(&self) -> Vec<&Parameter> {
        vec![&self.alpha_raw, &self.c_raw]
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.alpha_raw, &mut self.c_raw]
    }
}

/// Maps raw vars to constrained (alpha, c) on tape.
pub fn constrain(tape: &Tape, alpha_raw: Var, c_raw: Var) -> Result<(Var, Var)> {
    let a = tape.sigmoid(alpha_raw)?;
    let alpha = tape.affine(a, ALPHA_HI - ALPHA_LO, ALPHA_LO)?;
    let sp = tape.softplus(c_raw)?;
    let c = tape.affine(sp, 1.0, C_FLOOR)?;
    Ok((alpha, c))
}

/// Mean robust penalty of `pred - target` with learnable (alpha, c).
pub fn robust_loss_mean(tape: &Tape, pred: Var, target: Var, params: &RobustLossParams) -> Result<Var> {
    let (alpha, c) = params.bind_constrained(tape)?;
    let r = tape.sub(pred, target)?;
    let f = robust_elementwise(tape, r, alpha, c)?;
    tape.mean_all(f)
}

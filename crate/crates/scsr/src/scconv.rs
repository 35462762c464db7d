//! The self-calibrated convolution block.
//!
//! Input channels split in half. The first half drives a calibration
//! branch: pool by `r_pool`, convolve, upsample back, add the identity,
//! squash to (0, 1) with a sigmoid, and use that as a multiplicative
//! gate on a second convolution of the same half. Because the gate sees
//! a pooled copy, its receptive field is roughly `r_pool` times wider
//! than the 3x3 kernels alone, which is the point of the block. The
//! second half takes one plain convolution. The halves are concatenated
//! and passed through a PReLU with one learnable slope.

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::tape::{ParamBundle, Parameter, Tape, Var};
use crate::tensor::{ops, Shape, Tensor};
use crate::verify::suites::CheckOutcome;

/// Weight and bias of one convolution layer.
#[derive(Clone, Debug)]
pub struct ConvParams {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl ConvParams {
    /// Kaiming fan-in init: weights ~ N(0, sqrt(2 / fan_in)) with fan_in
    /// taken from the kernel's second axis (input channels for a forward
    /// conv, output channels for a transposed one), bias zero. Values
    /// are rounded to f32 so checkpoints round-trip bit for bit.
    pub fn init(name: &str, shape: Shape, seed: u64) -> Self {
        let fan_in = (shape.c * shape.h * shape.w) as f64;
        let std = (2.0 / fan_in).sqrt();
        let mut rng = rng::seeded(seed);
        let weight = Tensor::from_fn(shape, |_, _, _, _| {
            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            (z * std) as f32 as f64
        });
        ConvParams {
            weight: Parameter::new(format!("{name}.weight"), weight),
            bias: Parameter::new(format!("{name}.bias"), Tensor::zeros(Shape::new(1, shape.n, 1, 1))),
        }
    }

    /// Bias channel count differs between forward (first axis) and
    /// transposed (second axis) kernels; pick explicitly.
    pub fn init_transposed(name: &str, shape: Shape, seed: u64) -> Self {
        let mut p = ConvParams::init(name, shape, seed);
        p.bias = Parameter::new(format!("{name}.bias"), Tensor::zeros(Shape::new(1, shape.c, 1, 1)));
        p
    }

    pub fn bind(&self, tape: &Tape) -> (Var, Var) {
        (tape.param(&self.weight), tape.param(&self.bias))
    }
}

impl ParamBundle for ConvParams {
    fn params(&self) -> Vec<&Parameter> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Learnable state of one self-calibrated block: four half-to-half 3x3
/// convolutions and the output PReLU slope.
#[derive(Clone, Debug)]
pub struct ScBlockParams {
    pub f1: ConvParams,
    pub f2: ConvParams,
    pub f3: ConvParams,
    pub f4: ConvParams,
    pub slope: Parameter,
    pub r_pool: usize,
    pub half: usize,
}

/// Default pooling factor of the calibration branch.
pub const DEFAULT_R_POOL: usize = 4;

/// Initial PReLU slope.
pub const PRELU_INIT: f64 = 0.25;

impl ScBlockParams {
    /// Initializes a block for `channels` input channels (must be even).
    pub fn init(channels: usize, r_pool: usize, name: &str, seed: u64) -> Self {
        assert!(channels % 2 == 0, "SC block channels must be even, got {channels}");
        assert!(r_pool >= 1, "r_pool must be >= 1");
        let half = channels / 2;
        let conv_shape = Shape::new(half, half, 3, 3);
        ScBlockParams {
            f1: ConvParams::init(&format!("{name}.f1"), conv_shape, rng::derive(seed, &format!("{name}.f1"))),
            f2: ConvParams::init(&format!("{name}.f2"), conv_shape, rng::derive(seed, &format!("{name}.f2"))),
            f3: ConvParams::init(&format!("{name}.f3"), conv_shape, rng::derive(seed, &format!("{name}.f3"))),
            f4: ConvParams::init(&format!("{name}.f4"), conv_shape, rng::derive(seed, &format!("{name}.f4"))),
            slope: Parameter::new(format!("{name}.act"), Tensor::scalar(PRELU_INIT)),
            r_pool,
            half,
        }
    }
}

impl ParamBundle for ScBlockParams {
    fn params(&self) -> Vec<&Parameter> {
        let mut out = Vec::with_capacity(9);
        for c in [&self.f1, &self.f2, &self.f3, &self.f4] {
            out.extend(c.params());
        }
        out.push(&self.slope);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::with_capacity(9);
        for c in [&mut self.f1, &mut self.f2, &mut self.f3, &mut self.f4] {
            out.extend(c.params_mut());
        }
        out.push(&mut self.slope);
        out
    }
}

fn check_input(x_shape: Shape, p: &ScBlockParams) -> Result<()> {
    if x_shape.c % 2 != 0 || x_shape.c / 2 != p.half {
        return Err(Error::InvalidArgument {
            op: "sc_block",
            detail: format!("input has {} channels, block expects {}", x_shape.c, p.half * 2),
        });
    }
    if x_shape.h % p.r_pool != 0 || x_shape.w % p.r_pool != 0 {
        return Err(Error::InvalidArgument {
            op: "sc_block",
            detail: format!("spatial dims {}x{} not divisible by r_pool {}", x_shape.h, x_shape.w, p.r_pool),
        });
    }
    Ok(())
}

/// Tape version over explicit vars, so gradient checks can substitute
/// any of the nine parameters.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sc_block_vars(
    tape: &Tape,
    x: Var,
    f1: (Var, Var),
    f2: (Var, Var),
    f3: (Var, Var),
    f4: (Var, Var),
    slope: Var,
    r_pool: usize,
) -> Result<Var> {
    let c = tape.shape(x).c;
    let (xa, xb) = tape.split_channels(x, c / 2)?;
    let pooled = tape.avg_pool2d(xa, r_pool)?;
    let calib = tape.conv2d(pooled, f1.0, Some(f1.1), 1, 1)?;
    let spread = tape.upsample_bilinear(calib, r_pool)?;
    let gate = tape.sigmoid(tape.add(xa, spread)?)?;
    let feat = tape.conv2d(xa, f2.0, Some(f2.1), 1, 1)?;
    let gated = tape.mul(feat, gate)?;
    let mid = tape.conv2d(gated, f3.0, Some(f3.1), 1, 1)?;
    let yb = tape.conv2d(xb, f4.0, Some(f4.1), 1, 1)?;
    let cat = tape.concat_channels(mid, yb)?;
    tape.prelu(cat, slope)
}

/// Records one SC block on the tape. Output shape equals input shape.
pub fn sc_block(tape: &Tape, x: Var, p: &ScBlockParams) -> Result<Var> {
    check_input(tape.shape(x), p)?;
    sc_block_vars(
        tape,
        x,
        p.f1.bind(tape),
        p.f2.bind(tape),
        p.f3.bind(tape),
        p.f4.bind(tape),
        tape.param(&p.slope),
        p.r_pool,
    )
}

/// Forward-only SC block on plain tensors (inference path).
pub fn sc_block_value(x: &Tensor, p: &ScBlockParams) -> Result<Tensor> {
    check_input(x.shape(), p)?;
    let (xa, xb) = ops::split_channels(x, x.shape().c / 2)?;
    let pooled = ops::avg_pool2d(&xa, p.r_pool)?;
    let calib = ops::conv2d(&pooled, &p.f1.weight.value, Some(&p.f1.bias.value), 1, 1)?;
    let spread = ops::upsample_bilinear(&calib, p.r_pool)?;
    let gate = ops::sigmoid(&ops::add(&xa, &spread)?)?;
    let feat = ops::conv2d(&xa, &p.f2.weight.value, Some(&p.f2.bias.value), 1, 1)?;
    let gated = ops::mul(&feat, &gate)?;
    let mid = ops::conv2d(&gated, &p.f3.weight.value, Some(&p.f3.bias.value), 1, 1)?;
    let yb = ops::conv2d(&xb, &p.f4.weight.value, Some(&p.f4.bias.value), 1, 1)?;
    let slope = p.slope.value.value()?;
    ops::prelu(&ops::concat_channels(&mid, &yb)?, slope)
}

/// Gradient-suite case: finite differences through the whole block,
/// input and all nine parameters.
pub fn gradient_check_case(seed: u64, cases: usize) -> CheckOutcome {
    let half = 2usize;
    let conv = Shape::new(half, half, 3, 3);
    let bias = Shape::new(1, half, 1, 1);
    crate::verify::suites::fd_case(
        "sc_block end-to-end (x + 9 params)",
        seed,
        cases,
        &[
            ("x", Shape::new(1, 2 * half, 4, 4), -1.0, 1.0),
            ("w1", conv, -0.5, 0.5),
            ("b1", bias, -0.2, 0.2),
            ("w2", conv, -0.5, 0.5),
            ("b2", bias, -0.2, 0.2),
            ("w3", conv, -0.5, 0.5),
            ("b3", bias, -0.2, 0.2),
            ("w4", conv, -0.5, 0.5),
            ("b4", bias, -0.2, 0.2),
            ("slope", Shape::scalar(), 0.1, 0.4),
        ],
        |t, v| {
            let y = sc_block_vars(t, v[0], (v[1], v[2]), (v[3], v[4]), (v[5], v[6]), (v[7], v[8]), v[9], 2)?;
            let sq = t.mul(y, y)?;
            t.mean_all(sq)
        },
    )
}

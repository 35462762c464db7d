//! Generator and discriminator models plus the checkpoint container.

pub mod checkpoint;
pub mod discriminator;
pub mod generator;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use generator::{Generator, GeneratorConfig};

use crate::error::Result;
use crate::rng;
use crate::tensor::tape::{ParamBundle, Parameter, Tape, Var};
use crate::tensor::{Shape, Tensor};
use crate::verify::suites::CheckOutcome;
use crate::verify::{fd_estimate, relative_error, FD_REL_TOL};
use rand::Rng;

/// Coordinates sampled per parameter tensor in the end-to-end checks.
/// Full sweeps over every weight would dominate the suite budget
/// without exercising any new code path.
const COORDS_PER_PARAM: usize = 2;
/// Input coordinates sampled per case.
const INPUT_COORDS: usize = 3;

/// Checks tape gradients of a whole model against central differences:
/// every parameter tensor contributes sampled coordinates, and the
/// input gradient is sampled too. The loss is the mean squared output,
/// which keeps every gradient path input-dependent.
fn fd_over_params<M, B, A>(
    name: &str,
    seed: u64,
    cases: usize,
    input_shape: Shape,
    build: B,
    apply: A,
) -> CheckOutcome
where
    M: ParamBundle + Clone,
    B: Fn(u64) -> Result<M>,
    A: Fn(&Tape, &M, Var) -> Result<Var>,
{
    let run = || -> Result<(f64, String, usize, usize)> {
        let mut worst = 0.0f64;
        let mut worst_at = String::from("-");
        let mut checked = 0usize;
        let mut skipped = 0usize;

        let eval = |m: &M, xt: &Tensor| -> Result<f64> {
            let tape = Tape::new();
            let xv = tape.leaf(xt.clone());
            let loss = apply(&tape, m, xv)?;
            tape.value(loss).value()
        };

        for case in 0..cases {
            let case_seed = rng::derive(seed, name) ^ case as u64;
            let mut r = rng::seeded(case_seed);
            let x = rng::uniform_tensor(input_shape, 0.05, 0.95, &mut r);
            let model = build(rng::derive(case_seed, "model"))?;

            // Analytic pass: bind the input as a named parameter so its
            // gradient lands in the same bundle as the weights.
            let x_param = Parameter::new("fd.input", x.clone());
            let tape = Tape::new();
            let xv = tape.param(&x_param);
            let loss = apply(&tape, &model, xv)?;
            let grads = tape.backward(loss)?;

            let n_params = model.params().len();
            for k in 0..n_params {
                let (pname, shape, len) = {
                    let p = model.params()[k];
                    (p.name.clone(), p.value.shape(), p.value.len())
                };
                let mut idxs: Vec<usize> =
                    (0..COORDS_PER_PARAM.min(len)).map(|_| r.random_range(0..len)).collect();
                idxs.sort_unstable();
                idxs.dedup();
                let analytic = grads
                    .get(&pname)
                    .ok_or_else(|| crate::error::Error::InvalidArgument {
                        op: "fd_over_params",
                        detail: format!("no gradient recorded for `{pname}`"),
                    })?
                    .clone();
                for idx in idxs {
                    let base = model.params()[k].value.data()[idx];
                    let mut f = |vals: &[f64]| -> Result<f64> {
                        let mut m = model.clone();
                        {
                            let mut ps = m.params_mut();
                            let mut v = ps[k].value.data().to_vec();
                            v[idx] = vals[0];
                            ps[k].value = Tensor::new(shape, v)?;
                        }
                        eval(&m, &x)
                    };
                    let fd = match fd_estimate(&mut f, &[base], 0)? {
                        Some(v) => v,
                        None => {
                            skipped += 1;
                            continue;
                        }
                    };
                    let err = relative_error(analytic.data()[idx], fd);
                    checked += 1;
                    if err > worst {
                        worst = err;
                        worst_at = format!("{pname}[{idx}] case {case}");
                    }
                }
            }

            let x_grad = grads
                .get("fd.input")
                .ok_or_else(|| crate::error::Error::InvalidArgument {
                    op: "fd_over_params",
                    detail: "no gradient recorded for the input".into(),
                })?
                .clone();
            for _ in 0..INPUT_COORDS {
                let idx = r.random_range(0..x.len());
                let mut f = |vals: &[f64]| -> Result<f64> {
                    let mut v = x.data().to_vec();
                    v[idx] = vals[0];
                    eval(&model, &Tensor::new(input_shape, v)?)
                };
                let fd = match fd_estimate(&mut f, &[x.data()[idx]], 0)? {
                    Some(v) => v,
                    None => {
                        skipped += 1;
                        continue;
                    }
                };
                let err = relative_error(x_grad.data()[idx], fd);
                checked += 1;
                if err > worst {
                    worst = err;
                    worst_at = format!("input[{idx}] case {case}");
                }
            }
        }
        Ok((worst, worst_at, checked, skipped))
    };

    match run() {
        Ok((worst, worst_at, checked, skipped)) => CheckOutcome {
            name: name.to_string(),
            passed: worst <= FD_REL_TOL && checked > 0,
            detail: format!(
                "worst rel err {worst:.3e} at {worst_at} over {checked} coordinates \
                 ({skipped} skipped at activation kinks)"
            ),
        },
        Err(e) => CheckOutcome {
            name: name.to_string(),
            passed: false,
            detail: format!("failed to run: {e}"),
        },
    }
}

/// End-to-end gradient checks for tiny generator and discriminator
/// stacks, exercising every layer type in composition.
pub fn gradient_check_cases(seed: u64, cases: usize) -> Vec<CheckOutcome> {
    let g_cfg = GeneratorConfig { scale: 2, n_sc_blocks: 1, base_channels: 8, r_pool: 2 };
    let d_cfg = DiscriminatorConfig { channels: vec![4, 8], leaky_slope: 0.2 };
    vec![
        fd_over_params(
            "generator end-to-end (sampled params + input)",
            rng::derive(seed, "net_g"),
            cases,
            Shape::new(1, 3, 8, 8),
            {
                let cfg = g_cfg.clone();
                move |s| Generator::init(&cfg, s)
            },
            |t, m: &Generator, x| {
                let y = m.forward(t, x)?;
                let sq = t.mul(y, y)?;
                t.mean_all(sq)
            },
        ),
        fd_over_params(
            "discriminator end-to-end (sampled params + input)",
            rng::derive(seed, "net_d"),
            cases,
            Shape::new(2, 3, 16, 16),
            {
                let cfg = d_cfg.clone();
                move |s| Discriminator::init(&cfg, s)
            },
            |t, m: &Discriminator, x| {
                let y = m.forward(t, x)?;
                let sq = t.mul(y, y)?;
                t.mean_all(sq)
            },
        ),
    ]
}

//! The two runnable verification suites: oracle comparisons (fast paths
//! against loop references) and finite-difference gradient checks for
//! every differentiable operation. Both the `gradcheck` CLI command and
//! the test suites call these, so there is one source of truth for what
//! "verified" means.

use std::time::Instant;

use crate::error::Result;
use crate::rng::{derive, seeded, uniform_tensor};
use crate::tensor::tape::{Tape, Var};
use crate::tensor::{ops, Shape, Tensor};
use crate::verify::{
    avg_pool2d_reference, bicubic_reference, check_gradient, conv2d_reference,
    conv2d_transposed_reference, sc_block_reference, upsample_bilinear_reference, FD_REL_TOL,
};

/// One named check with its outcome.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// A finished suite run.
#[derive(Debug)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub outcomes: Vec<CheckOutcome>,
    pub wall_ms: u128,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }

    /// One line per check plus a summary line, ready to print.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for o in &self.outcomes {
            let status = if o.passed { "ok  " } else { "FAIL" };
            out.push_str(&format!("{status}  {:<52} {}\n", o.name, o.detail));
        }
        let failed = self.outcomes.iter().filter(|o| !o.passed).count();
        out.push_str(&format!(
            "{}: {} checks, {} failed, {} ms\n",
            self.suite,
            self.outcomes.len(),
            failed,
            self.wall_ms
        ));
        out
    }
}

const ORACLE_TOL: f64 = 1e-10;

fn oracle_outcome(name: &str, diff: f64) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed: diff <= ORACLE_TOL,
        detail: format!("max |fast - reference| = {diff:.3e} (tol {ORACLE_TOL:.0e})"),
    }
}

fn rand_t(shape: Shape, seed: u64) -> Tensor {
    uniform_tensor(shape, -1.0, 1.0, &mut seeded(seed))
}

/// Check groups selectable from the command line, named for the module
/// whose arithmetic they exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckModule {
    Tensor,
    ScConv,
    Losses,
    Networks,
}

impl std::str::FromStr for CheckModule {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tensor" => Ok(CheckModule::Tensor),
            "scconv" => Ok(CheckModule::ScConv),
            "losses" => Ok(CheckModule::Losses),
            "networks" => Ok(CheckModule::Networks),
            other => Err(crate::error::Error::InvalidArgument {
                op: "check_module",
                detail: format!("unknown module `{other}` (expected tensor, scconv, losses, or networks)"),
            }),
        }
    }
}

/// Oracle comparisons for the structural tensor ops and the resampler.
fn tensor_oracle_outcomes(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut outcomes = Vec::new();

    // conv2d on two shapes: a stride-1 3x3 and a strided 5x5.
    let conv_cases = [
        ("conv2d 3x3 s1 p1", Shape::new(2, 3, 10, 9), Shape::new(4, 3, 3, 3), 1usize, 1usize),
        ("conv2d 5x5 s2 p2", Shape::new(1, 4, 11, 13), Shape::new(2, 4, 5, 5), 2, 2),
    ];
    for (name, xs, ws, s, p) in conv_cases {
        let x = rand_t(xs, derive(seed, name));
        let w = rand_t(ws, derive(seed, name) ^ 1);
        let b = rand_t(Shape::new(1, ws.n, 1, 1), derive(seed, name) ^ 2);
        let got = ops::conv2d(&x, &w, Some(&b), s, p)?;
        let want = conv2d_reference(&x, &w, Some(&b), s, p)?;
        outcomes.push(oracle_outcome(name, got.max_abs_diff(&want)?));
    }

    // Transposed conv against the zero-stuffing construction.
    let tconv_cases = [
        ("conv2d_transposed 4x4 s2 p1", Shape::new(2, 3, 6, 5), Shape::new(3, 2, 4, 4), 2usize, 1usize),
        ("conv2d_transposed 3x3 s1 p1", Shape::new(1, 2, 7, 7), Shape::new(2, 2, 3, 3), 1, 1),
    ];
    for (name, xs, ws, s, p) in tconv_cases {
        let x = rand_t(xs, derive(seed, name));
        let w = rand_t(ws, derive(seed, name) ^ 1);
        let b = rand_t(Shape::new(1, ws.c, 1, 1), derive(seed, name) ^ 2);
        let got = ops::conv2d_transposed(&x, &w, Some(&b), s, p)?;
        let want = conv2d_transposed_reference(&x, &w, Some(&b), s, p)?;
        outcomes.push(oracle_outcome(name, got.max_abs_diff(&want)?));
    }

    // Pooling and bilinear upsampling.
    let x = rand_t(Shape::new(2, 3, 12, 8), derive(seed, "pool"));
    for r in [2usize, 4] {
        let got = ops::avg_pool2d(&x, r)?;
        let want = avg_pool2d_reference(&x, r)?;
        outcomes.push(oracle_outcome(&format!("avg_pool2d r={r}"), got.max_abs_diff(&want)?));
    }
    let x = rand_t(Shape::new(1, 3, 5, 7), derive(seed, "bilinear"));
    for r in [2usize, 4] {
        let got = ops::upsample_bilinear(&x, r)?;
        let want = upsample_bilinear_reference(&x, r)?;
        outcomes.push(oracle_outcome(&format!("upsample_bilinear r={r}"), got.max_abs_diff(&want)?));
    }

    // Separable resampler against direct 2-D evaluation, both directions.
    let img = uniform_tensor(Shape::new(1, 3, 12, 17), 0.0, 1.0, &mut seeded(derive(seed, "resample")));
    let down = crate::imaging::resample_tensor(&img, 5, 7)?;
    let down_ref = bicubic_reference(&img, 5, 7)?;
    outcomes.push(oracle_outcome("bicubic_resize downscale", down.max_abs_diff(&down_ref)?));
    let up = crate::imaging::resample_tensor(&img, 24, 34)?;
    let up_ref = bicubic_reference(&img, 24, 34)?;
    outcomes.push(oracle_outcome("bicubic_resize upscale", up.max_abs_diff(&up_ref)?));

    Ok(outcomes)
}

/// The self-calibrated block against its straight-line transcription.
fn sc_oracle_outcome(seed: u64) -> Result<CheckOutcome> {
    let params = crate::scconv::ScBlockParams::init(6, 2, "oracle_sc", derive(seed, "sc_params"));
    let x = rand_t(Shape::new(2, 6, 8, 8), derive(seed, "sc_input"));
    let got = crate::scconv::sc_block_value(&x, &params)?;
    let want = sc_block_reference(&x, &params)?;
    Ok(oracle_outcome("sc_block r_pool=2", got.max_abs_diff(&want)?))
}

/// Compares every structural operation against its loop reference on
/// seeded random inputs, plus the resampler against direct evaluation.
pub fn run_oracle_suite(seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut outcomes = tensor_oracle_outcomes(seed)?;
    outcomes.push(sc_oracle_outcome(seed)?);
    Ok(SuiteReport { suite: "oracle suite", outcomes, wall_ms: start.elapsed().as_millis() })
}

/// Builds a scalar loss from an op applied to named inputs, checks the
/// tape gradient of every input against central differences, and
/// reports the worst case over `cases` seeded repetitions.
pub(crate) fn fd_case(
    name: &str,
    seed: u64,
    cases: usize,
    inputs: &[(&str, Shape, f64, f64)],
    apply: impl Fn(&Tape, &[Var]) -> Result<Var>,
) -> CheckOutcome {
    let mut worst = 0.0_f64;
    let mut detail = String::new();
    for case in 0..cases {
        let case_seed = derive(seed, name) ^ case as u64;
        let tensors: Vec<Tensor> = inputs
            .iter()
            .enumerate()
            .map(|(i, (_, shape, lo, hi))| {
                uniform_tensor(*shape, *lo, *hi, &mut seeded(case_seed ^ ((i as u64) << 32)))
            })
            .collect();
        // Analytic gradients from one tape.
        let run = || -> Result<Vec<Vec<f64>>> {
            let tape = Tape::new();
            let vars: Vec<Var> = tensors
                .iter()
                .zip(inputs)
                .map(|(t, (nm, ..))| {
                    tape.param(&crate::tensor::tape::Parameter::new(*nm, t.clone()))
                })
                .collect();
            let root = apply(&tape, &vars)?;
            let grads = tape.backward(root)?;
            Ok(inputs
                .iter()
                .zip(tensors.iter())
                .map(|((nm, ..), t)| {
                    grads
                        .get(nm)
                        .map(|g| g.data().to_vec())
                        .unwrap_or_else(|| vec![0.0; t.len()])
                })
                .collect())
        };
        let analytic = match run() {
            Ok(a) => a,
            Err(e) => {
                return CheckOutcome {
                    name: name.to_string(),
                    passed: false,
                    detail: format!("forward/backward failed: {e}"),
                }
            }
        };
        // Numeric gradient per input.
        for (k, (nm, shape, ..)) in inputs.iter().enumerate() {
            let mut f = |vals: &[f64]| -> Result<f64> {
                let tape = Tape::new();
                let vars: Vec<Var> = tensors
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        if i == k {
                            Ok(tape.leaf(Tensor::new(*shape, vals.to_vec())?))
                        } else {
                            Ok(tape.leaf(t.clone()))
                        }
                    })
                    .collect::<Result<_>>()?;
                let root = apply(&tape, &vars)?;
                tape.value(root).value()
            };
            match check_gradient(&mut f, tensors[k].data(), &analytic[k]) {
                Ok(report) => {
                    if report.max_rel_err > worst {
                        worst = report.max_rel_err;
                        detail = format!(
                            "worst rel err {:.3e} (tol {FD_REL_TOL:.0e}) input `{nm}` case {case}",
                            report.max_rel_err
                        );
                    }
                }
                Err(e) => {
                    return CheckOutcome {
                        name: name.to_string(),
                        passed: false,
                        detail: format!("finite difference failed: {e}"),
                    }
                }
            }
        }
    }
    CheckOutcome { name: name.to_string(), passed: worst <= FD_REL_TOL, detail }
}

/// Finite-difference checks for the primitive tensor-level operations.
fn tensor_fd_outcomes(seed: u64, n: usize) -> Vec<CheckOutcome> {
    let mut outcomes = Vec::new();

    outcomes.push(fd_case(
        "conv2d (x, w, b)",
        derive(seed, "g_conv"),
        n,
        &[
            ("x", Shape::new(1, 2, 5, 6), -1.0, 1.0),
            ("w", Shape::new(3, 2, 3, 3), -0.7, 0.7),
            ("b", Shape::new(1, 3, 1, 1), -0.3, 0.3),
        ],
        |t, v| {
            let y = t.conv2d(v[0], v[1], Some(v[2]), 1, 1)?;
            t.mean_all(y)
        },
    ));
    outcomes.push(fd_case(
        "conv2d strided (x, w)",
        derive(seed, "g_conv_s2"),
        n,
        &[
            ("x", Shape::new(1, 2, 7, 7), -1.0, 1.0),
            ("w", Shape::new(2, 2, 5, 5), -0.5, 0.5),
        ],
        |t, v| {
            let y = t.conv2d(v[0], v[1], None, 2, 2)?;
            t.mean_all(y)
        },
    ));
    outcomes.push(fd_case(
        "conv2d_transposed (x, w, b)",
        derive(seed, "g_tconv"),
        n,
        &[
            ("x", Shape::new(1, 3, 4, 5), -1.0, 1.0),
            ("w", Shape::new(3, 2, 4, 4), -0.5, 0.5),
            ("b", Shape::new(1, 2, 1, 1), -0.3, 0.3),
        ],
        |t, v| {
            let y = t.conv2d_transposed(v[0], v[1], Some(v[2]), 2, 1)?;
            t.mean_all(y)
        },
    ));
    outcomes.push(fd_case(
        "avg_pool2d",
        derive(seed, "g_pool"),
        n,
        &[("x", Shape::new(1, 2, 8, 8), -1.0, 1.0)],
        |t, v| {
            let y = t.avg_pool2d(v[0], 4)?;
            // Square the output so the pool gradient is input-dependent.
            let sq = t.mul(y, y)?;
            t.mean_all(sq)
        },
    ));
    outcomes.push(fd_case(
        "upsample_bilinear",
        derive(seed, "g_up"),
        n,
        &[("x", Shape::new(1, 2, 4, 5), -1.0, 1.0)],
        |t, v| {
            let y = t.upsample_bilinear(v[0], 3)?;
            let sq = t.mul(y, y)?;
            t.mean_all(sq)
        },
    ));
    outcomes.push(fd_case(
        "sigmoid",
        derive(seed, "g_sigmoid"),
        n,
        &[("x", Shape::new(1, 2, 4, 4), -3.0, 3.0)],
        |t, v| {
            let y = t.sigmoid(v[0])?;
            let sq = t.mul(y, y)?;
            t.mean_all(sq)
        },
    ));
    outcomes.push(fd_case(
        "prelu (x, slope)",
        derive(seed, "g_prelu"),
        n,
        &[
            ("x", Shape::new(1, 2, 4, 4), -1.0, 1.0),
            ("slope", Shape::scalar(), 0.05, 0.6),
        ],
        |t, v| {
            let y = t.prelu(v[0], v[1])?;
            let sq = t.mul(y, y)?;
            t.mean_all(sq)
        },
    ));
    outcomes
}

/// Finite-difference checks for every differentiable operation, the SC
/// block, all four losses (including the robust loss shape parameters),
/// and tiny end-to-end networks. At least ten seeded cases per op.
pub fn run_gradient_suite(seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let n = 10;
    let mut outcomes = tensor_fd_outcomes(seed, n);
    outcomes.push(crate::scconv::gradient_check_case(derive(seed, "g_sc"), n));
    outcomes.extend(crate::losses::gradient_check_cases(derive(seed, "g_losses"), n));
    outcomes.extend(crate::networks::gradient_check_cases(derive(seed, "g_nets"), n));

    Ok(SuiteReport { suite: "gradient suite", outcomes, wall_ms: start.elapsed().as_millis() })
}

/// Oracle and finite-difference checks for one module only, with the
/// same seed derivations the full suites use.
pub fn run_module_suite(module: CheckModule, seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let n = 10;
    let (suite, outcomes) = match module {
        CheckModule::Tensor => {
            let mut o = tensor_oracle_outcomes(seed)?;
            o.extend(tensor_fd_outcomes(seed, n));
            ("tensor checks", o)
        }
        CheckModule::ScConv => {
            let o = vec![
                sc_oracle_outcome(seed)?,
                crate::scconv::gradient_check_case(derive(seed, "g_sc"), n),
            ];
            ("scconv checks", o)
        }
        CheckModule::Losses => {
            ("losses checks", crate::losses::gradient_check_cases(derive(seed, "g_losses"), n))
        }
        CheckModule::Networks => {
            ("networks checks", crate::networks::gradient_check_cases(derive(seed, "g_nets"), n))
        }
    };
    Ok(SuiteReport { suite, outcomes, wall_ms: start.elapsed().as_millis() })
}

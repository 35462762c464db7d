//! Total-variation regularizer: anisotropic squared differences of
//! vertically and horizontally adjacent pixels, each direction
//! averaged over its valid positions.

use crate::error::{Error, Result};
use crate::tensor::ops;
use crate::tensor::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Mean squared vertical difference plus mean squared horizontal
/// difference. A direction with no valid pairs (H < 2 or W < 2)
/// contributes zero; only a 1x1 spatial extent is an error.
pub fn tv_loss(tape: &Tape, x: Var) -> Result<Var> {
    let xv = tape.value(x);
    let s = xv.shape();
    if s.h < 2 && s.w < 2 {
        return Err(Error::InvalidArgument {
            op: "tv_loss",
            detail: format!("needs height or width >= 2, got {s}"),
        });
    }
    let v_count = (s.n * s.c * s.h.saturating_sub(1) * s.w) as f64;
    let h_count = (s.n * s.c * s.h * s.w.saturating_sub(1)) as f64;
    let mut total = 0.0;
    for n in 0..s.n {
        for c in 0..s.c {
            for i in 0..s.h {
                for j in 0..s.w {
                    let v = xv.at(n, c, i, j);
                    if i + 1 < s.h {
                        total += (xv.at(n, c, i + 1, j) - v).powi(2) / v_count;
                    }
                    if j + 1 < s.w {
                        total += (xv.at(n, c, i, j + 1) - v).powi(2) / h_count;
                    }
                }
            }
        }
    }
    let out = ops::ensure_finite("tv_loss", Tensor::scalar(total))?;
    Ok(tape.record_node(
        out,
        Box::new(move |g: &Tensor| {
            let gv = g.value().expect("tv output is scalar");
            let mut gx = vec![0.0; xv.len()];
            for n in 0..s.n {
                for c in 0..s.c {
                    for i in 0..s.h {
                        for j in 0..s.w {
                            let v = xv.at(n, c, i, j);
                            if i + 1 < s.h {
                                let d = 2.0 * (xv.at(n, c, i + 1, j) - v) * gv / v_count;
                                gx[s.index(n, c, i + 1, j)] += d;
                                gx[s.index(n, c, i, j)] -= d;
                            }
                            if j + 1 < s.w {
                                let d = 2.0 * (xv.at(n, c, i, j + 1) - v) * gv / h_count;
                                gx[s.index(n, c, i, j + 1)] += d;
                                gx[s.index(n, c, i, j)] -= d;
                            }
                        }
                    }
                }
            }
            vec![(x.0, Tensor::new(s, gx).unwrap())]
        }),
    ))
}

//! Reverse-mode autodiff on an operation tape.
//!
//! A [`Tape`] owns every intermediate value of one forward pass. Ops
//! append nodes, so node order is a topological order by construction,
//! and [`Tape::backward`] replays it once in reverse, accumulating
//! gradients into a map keyed by parameter name. Tapes are cheap,
//! single-use structures: build one per training step and drop it.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::{ops, Shape, Tensor};

/// Handle to a value recorded on a specific tape. Only meaningful for
/// the tape that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// A named learnable value plus its gradient buffer.
#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub learnable: bool,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Parameter { name: name.into(), value, grad, learnable: true }
    }

    /// A parameter excluded from optimizer updates (still checkpointed).
    pub fn frozen(name: impl Into<String>, value: Tensor) -> Self {
        Parameter { learnable: false, ..Parameter::new(name, value) }
    }

    pub fn zero_grad(&mut self) {
        self.grad = Tensor::zeros(self.value.shape());
    }

    /// Adds a gradient contribution. Repeated calls accumulate.
    pub fn accumulate(&mut self, g: &Tensor) -> Result<()> {
        if g.shape() != self.value.shape() {
            return Err(Error::ShapeMismatch {
                op: "Parameter::accumulate",
                detail: format!("param `{}` is {}, gradient is {}", self.name, self.value.shape(), g.shape()),
            });
        }
        self.grad = ops::add(&self.grad, g)?;
        Ok(())
    }
}

/// Anything that owns a flat collection of named parameters: blocks,
/// whole networks, loss heads. Checkpointing, the optimizer, and the
/// gradient checker all walk parameters through this trait.
pub trait ParamBundle {
    fn params(&self) -> Vec<&Parameter>;
    fn params_mut(&mut self) -> Vec<&mut Parameter>;

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Total number of scalar values across all parameters.
    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Adds a backward pass's gradients into the parameter buffers.
    fn accumulate(&mut self, grads: &Gradients) -> Result<()> {
        grads.accumulate_into(self.params_mut())
    }
}

impl ParamBundle for Vec<Parameter> {
    fn params(&self) -> Vec<&Parameter> {
        self.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.iter_mut().collect()
    }
}

/// Gradients of one backward pass, keyed by parameter name.
#[derive(Debug, Default)]
pub struct Gradients {
    map: HashMap<String, Tensor>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Adds every gradient into its parameter's buffer. Parameters the
    /// pass never touched keep their current (usually zero) gradient.
    pub fn accumulate_into<'a>(&self, params: impl IntoIterator<Item = &'a mut Parameter>) -> Result<()> {
        for p in params {
            if let Some(g) = self.map.get(&p.name) {
                p.accumulate(g)?;
            }
        }
        Ok(())
    }
}

/// Contributions an op's backward rule sends to its parents:
/// (parent node id, gradient w.r.t. that parent).
pub(crate) type BackFn = Box<dyn Fn(&Tensor) -> Vec<(usize, Tensor)>>;

struct Node {
    value: Tensor,
    back: Option<BackFn>,
    /// Leaf bound to a named parameter: backward deposits here.
    param: Option<String>,
}

/// Records one forward pass and replays it backward.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, node: Node) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var(nodes.len() - 1)
    }

    /// A constant or input leaf. Gradients stop here.
    pub fn leaf(&self, value: Tensor) -> Var {
        self.push(Node { value, back: None, param: None })
    }

    /// A leaf bound to a parameter: backward credits `p.name`.
    pub fn param(&self, p: &Parameter) -> Var {
        self.push(Node { value: p.value.clone(), back: None, param: Some(p.name.clone()) })
    }

    /// The forward value at `v`.
    pub fn value(&self, v: Var) -> Tensor {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes.borrow()[v.0].value.shape()
    }

    pub(crate) fn record_node(&self, value: Tensor, back: BackFn) -> Var {
        self.push(Node { value, back: Some(back), param: None })
    }

    /// Runs reverse-mode accumulation from a scalar root. Visits each
    /// node at most once, in reverse recording order.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root_shape = nodes[root.0].value.shape();
        if !root_shape.is_scalar() {
            return Err(Error::NonScalarRoot { shape: root_shape.to_string() });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[root.0] = Some(Tensor::scalar(1.0));
        let mut out = Gradients::default();
        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if let Some(name) = &node.param {
                match out.map.entry(name.clone()) {
                    std::collections::hash_map::Entry::Occupied(mut e) => {
                        let sum = ops::add(e.get(), &g)?;
                        e.insert(sum);
                    }
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(g.clone());
                    }
                }
            }
            if let Some(back) = &node.back {
                for (pid, contrib) in back(&g) {
                    debug_assert!(pid < id, "parents must precede children on the tape");
                    grads[pid] = Some(match grads[pid].take() {
                        Some(acc) => ops::add(&acc, &contrib)?,
                        None => contrib,
                    });
                }
            }
        }
        Ok(out)
    }

    // --- recorded operations -------------------------------------------

    pub fn conv2d(&self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let xv = self.value(x);
        let wv = self.value(w);
        let bv = b.map(|v| self.value(v));
        let y = ops::conv2d(&xv, &wv, bv.as_ref(), stride, pad)?;
        let (xs, ws) = (xv.shape(), wv.shape());
        let back: BackFn = Box::new(move |g| {
            let mut outs = vec![
                (x.0, ops::conv2d_grad_input(g, &wv, stride, pad, xs.h, xs.w)),
                (w.0, ops::conv2d_grad_weight(g, &xv, ws, stride, pad)),
            ];
            if let Some(bvar) = b {
                outs.push((bvar.0, ops::grad_bias(g)));
            }
            outs
        });
        Ok(self.record_node(y, back))
    }

    pub fn conv2d_transposed(&self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let xv = self.value(x);
        let wv = self.value(w);
        let bv = b.map(|v| self.value(v));
        let y = ops::conv2d_transposed(&xv, &wv, bv.as_ref(), stride, pad)?;
        let ws = wv.shape();
        let back: BackFn = Box::new(move |g| {
            let gx = ops::convt_grad_input(g, &wv, stride, pad)
                .expect("transposed-conv input gradient shapes are consistent by construction");
            let mut outs = vec![
                (x.0, gx),
                (w.0, ops::convt_grad_weight(g, &xv, ws, stride, pad)),
            ];
            if let Some(bvar) = b {
                outs.push((bvar.0, ops::grad_bias(g)));
            }
            outs
        });
        Ok(self.record_node(y, back))
    }

    pub fn avg_pool2d(&self, x: Var, r: usize) -> Result<Var> {
        let xv = self.value(x);
        let y = ops::avg_pool2d(&xv, r)?;
        let (h, w) = (xv.shape().h, xv.shape().w);
        let back: BackFn = Box::new(move |g| vec![(x.0, ops::avg_pool2d_grad(g, r, h, w))]);
        Ok(self.record_node(y, back))
    }

    pub fn upsample_bilinear(&self, x: Var, r: usize) -> Result<Var> {
        let xv = self.value(x);
        let y = ops::upsample_bilinear(&xv, r)?;
        let (h, w) = (xv.shape().h, xv.shape().w);
        let back: BackFn = Box::new(move |g| vec![(x.0, ops::upsample_bilinear_grad(g, r, h, w))]);
        Ok(self.record_node(y, back))
    }

    pub fn sigmoid(&self, x: Var) -> Result<Var> {
        let y = ops::sigmoid(&self.value(x))?;
        let yc = y.clone();
        let back: BackFn = Box::new(move |g| {
            let gy = Tensor::from_fn(yc.shape(), |n, c, i, j| {
                let s = yc.at(n, c, i, j);
                g.at(n, c, i, j) * s * (1.0 - s)
            });
            vec![(x.0, gy)]
        });
        Ok(self.record_node(y, back))
    }

    /// PReLU with a learnable scalar slope (1x1x1x1 Var). The slope
    /// gradient is the sum of g*x over the negative inputs; at x = 0 the
    /// positive branch (derivative 1) is used.
    pub fn prelu(&self, x: Var, slope: Var) -> Result<Var> {
        let xv = self.value(x);
        let sv = self.value(slope);
        let a = sv.value().map_err(|_| Error::InvalidArgument {
            op: "prelu",
            detail: format!("slope must be scalar, got {}", sv.shape()),
        })?;
        let y = ops::prelu(&xv, a)?;
        let back: BackFn = Box::new(move |g| {
            let gx = Tensor::from_fn(xv.shape(), |n, c, i, j| {
                let v = xv.at(n, c, i, j);
                g.at(n, c, i, j) * if v >= 0.0 { 1.0 } else { a }
            });
            let mut ga = 0.0;
            for (idx, &v) in xv.data().iter().enumerate() {
                if v < 0.0 {
                    ga += g.data()[idx] * v;
                }
            }
            vec![(x.0, gx), (slope.0, Tensor::scalar(ga))]
        });
        Ok(self.record_node(y, back))
    }

    /// Leaky ReLU with a fixed (non-learnable) slope.
    pub fn leaky_relu(&self, x: Var, slope: f64) -> Result<Var> {
        let xv = self.value(x);
        let y = ops::leaky_relu(&xv, slope)?;
        let back: BackFn = Box::new(move |g| {
            let gx = Tensor::from_fn(xv.shape(), |n, c, i, j| {
                let v = xv.at(n, c, i, j);
                g.at(n, c, i, j) * if v >= 0.0 { 1.0 } else { slope }
            });
            vec![(x.0, gx)]
        });
        Ok(self.record_node(y, back))
    }

    pub fn relu(&self, x: Var) -> Result<Var> {
        self.leaky_relu(x, 0.0)
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let y = ops::add(&self.value(a), &self.value(b))?;
        let back: BackFn = Box::new(move |g| vec![(a.0, g.clone()), (b.0, g.clone())]);
        Ok(self.record_node(y, back))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        let y = ops::sub(&self.value(a), &self.value(b))?;
        let back: BackFn = Box::new(move |g| {
            vec![
                (a.0, g.clone()),
                (b.0, ops::affine(g, -1.0, 0.0).expect("negation of a finite gradient is finite")),
            ]
        });
        Ok(self.record_node(y, back))
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let av = self.value(a);
        let bv = self.value(b);
        let y = ops::mul(&av, &bv)?;
        let back: BackFn = Box::new(move |g| {
            vec![
                (a.0, ops::mul(g, &bv).expect("shapes validated in forward")),
                (b.0, ops::mul(g, &av).expect("shapes validated in forward")),
            ]
        });
        Ok(self.record_node(y, back))
    }

    pub fn affine(&self, x: Var, m: f64, a: f64) -> Result<Var> {
        let y = ops::affine(&self.value(x), m, a)?;
        let back: BackFn = Box::new(move |g| {
            vec![(x.0, ops::affine(g, m, 0.0).expect("scaling a finite gradient is finite"))]
        });
        Ok(self.record_node(y, back))
    }

    /// Clamp to [lo, hi]; gradient passes only strictly inside the band.
    pub fn clamp(&self, x: Var, lo: f64, hi: f64) -> Result<Var> {
        let xv = self.value(x);
        let y = ops::clamp(&xv, lo, hi)?;
        let back: BackFn = Box::new(move |g| {
            let gx = Tensor::from_fn(xv.shape(), |n, c, i, j| {
                let v = xv.at(n, c, i, j);
                if v > lo && v < hi {
                    g.at(n, c, i, j)
                } else {
                    0.0
                }
            });
            vec![(x.0, gx)]
        });
        Ok(self.record_node(y, back))
    }

    pub fn ln(&self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let y = ops::ln(&xv)?;
        let back: BackFn = Box::new(move |g| {
            let gx = Tensor::from_fn(xv.shape(), |n, c, i, j| g.at(n, c, i, j) / xv.at(n, c, i, j));
            vec![(x.0, gx)]
        });
        Ok(self.record_node(y, back))
    }

    pub fn softplus(&self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let y = ops::softplus(&xv)?;
        let back: BackFn = Box::new(move |g| {
            let gx = Tensor::from_fn(xv.shape(), |n, c, i, j| {
                g.at(n, c, i, j) * ops::sigmoid_scalar(xv.at(n, c, i, j))
            });
            vec![(x.0, gx)]
        });
        Ok(self.record_node(y, back))
    }

    pub fn mean_all(&self, x: Var) -> Result<Var> {
        let xs = self.shape(x);
        let y = ops::mean_all(&self.value(x))?;
        let back: BackFn = Box::new(move |g| {
            let gv = g.value().expect("mean_all output is scalar") / xs.len() as f64;
            vec![(x.0, Tensor::full(xs, gv))]
        });
        Ok(self.record_node(y, back))
    }

    pub fn sum_all(&self, x: Var) -> Result<Var> {
        let xs = self.shape(x);
        let y = ops::sum_all(&self.value(x))?;
        let back: BackFn = Box::new(move |g| {
            let gv = g.value().expect("sum_all output is scalar");
            vec![(x.0, Tensor::full(xs, gv))]
        });
        Ok(self.record_node(y, back))
    }

    pub fn spatial_mean(&self, x: Var) -> Result<Var> {
        let xs = self.shape(x);
        let y = ops::spatial_mean(&self.value(x))?;
        let back: BackFn = Box::new(move |g| {
            let area = (xs.h * xs.w) as f64;
            let gx = Tensor::from_fn(xs, |n, c, _, _| g.at(n, c, 0, 0) / area);
            vec![(x.0, gx)]
        });
        Ok(self.record_node(y, back))
    }

    pub fn concat_channels(&self, a: Var, b: Var) -> Result<Var> {
        let av = self.value(a);
        let bv = self.value(b);
        let y = ops::concat_channels(&av, &bv)?;
        let ca = av.shape().c;
        let cb = bv.shape().c;
        let back: BackFn = Box::new(move |g| {
            vec![
                (a.0, ops::slice_channels(g, 0, ca).expect("concat output covers both slices")),
                (b.0, ops::slice_channels(g, ca, ca + cb).expect("concat output covers both slices")),
            ]
        });
        Ok(self.record_node(y, back))
    }

    pub fn slice_channels(&self, x: Var, from: usize, to: usize) -> Result<Var> {
        let xs = self.shape(x);
        let y = ops::slice_channels(&self.value(x), from, to)?;
        let back: BackFn = Box::new(move |g| {
            let gx = Tensor::from_fn(xs, |n, c, i, j| {
                if c >= from && c < to {
                    g.at(n, c - from, i, j)
                } else {
                    0.0
                }
            });
            vec![(x.0, gx)]
        });
        Ok(self.record_node(y, back))
    }

    pub fn split_channels(&self, x: Var, k: usize) -> Result<(Var, Var)> {
        let c = self.shape(x).c;
        if k == 0 || k >= c {
            return Err(Error::InvalidArgument {
                op: "split_channels",
                detail: format!("split point {k} must lie strictly inside 0..{c}"),
            });
        }
        Ok((self.slice_channels(x, 0, k)?, self.slice_channels(x, k, c)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, uniform_tensor};
    use crate::verify::{check_gradient, FdReport};

    fn rand_t(shape: Shape, seed: u64) -> Tensor {
        uniform_tensor(shape, -1.0, 1.0, &mut seeded(seed))
    }

    /// Finite-difference check of d(mean of op(x))/dx for a unary op.
    fn fd_check_unary(
        shape: Shape,
        seed: u64,
        apply: impl Fn(&Tape, Var) -> Result<Var>,
    ) -> FdReport {
        let x0 = rand_t(shape, seed);
        let p = Parameter::new("x", x0.clone());
        let tape = Tape::new();
        let xv = tape.param(&p);
        let y = apply(&tape, xv).unwrap();
        let root = tape.mean_all(y).unwrap();
        let grads = tape.backward(root).unwrap();
        let analytic = grads.get("x").unwrap().data().to_vec();
        let mut f = |vals: &[f64]| -> crate::error::Result<f64> {
            let t = Tape::new();
            let xv = t.leaf(Tensor::new(shape, vals.to_vec())?);
            let y = apply(&t, xv)?;
            t.value(t.mean_all(y)?).value()
        };
        check_gradient(&mut f, x0.data(), &analytic).unwrap()
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let tape = Tape::new();
        let p = Parameter::new("x", rand_t(Shape::new(1, 2, 3, 3), 1));
        let x = tape.param(&p);
        let root = tape.sum_all(x).unwrap();
        let grads = tape.backward(root).unwrap();
        let g = grads.get("x").unwrap();
        assert!(g.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn backward_of_mean_is_inverse_count() {
        let tape = Tape::new();
        let p = Parameter::new("x", rand_t(Shape::new(1, 1, 4, 4), 2));
        let x = tape.param(&p);
        let root = tape.mean_all(x).unwrap();
        let grads = tape.backward(root).unwrap();
        assert!(grads.get("x").unwrap().data().iter().all(|&v| v == 1.0 / 16.0));
    }

    #[test]
    fn sigmoid_gradient_at_zero_is_quarter() {
        let tape = Tape::new();
        let p = Parameter::new("x", Tensor::scalar(0.0));
        let x = tape.param(&p);
        let y = tape.sigmoid(x).unwrap();
        let root = tape.sum_all(y).unwrap();
        let grads = tape.backward(root).unwrap();
        assert_eq!(grads.get("x").unwrap().value().unwrap(), 0.25);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let tape = Tape::new();
        let x = tape.leaf(rand_t(Shape::new(1, 1, 2, 2), 3));
        let err = tape.backward(x).unwrap_err();
        assert!(matches!(err, Error::NonScalarRoot { .. }));
    }

    #[test]
    fn two_backward_passes_accumulate_exactly_twice() {
        let mut p = Parameter::new("w", rand_t(Shape::new(1, 1, 2, 2), 4));
        let tape = Tape::new();
        let w = tape.param(&p);
        let sq = tape.mul(w, w).unwrap();
        let root = tape.mean_all(sq).unwrap();
        let g1 = tape.backward(root).unwrap();
        g1.accumulate_into([&mut p]).unwrap();
        let after_one = p.grad.clone();
        let g2 = tape.backward(root).unwrap();
        g2.accumulate_into([&mut p]).unwrap();
        let doubled = ops::affine(&after_one, 2.0, 0.0).unwrap();
        assert_eq!(p.grad.max_abs_diff(&doubled).unwrap(), 0.0);
        p.zero_grad();
        assert!(p.grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_var_used_twice_sums_both_paths() {
        // y = x * x, dy/dx = 2x via two edges into the same parent.
        let p = Parameter::new("x", Tensor::scalar(3.0));
        let tape = Tape::new();
        let x = tape.param(&p);
        let y = tape.mul(x, x).unwrap();
        let root = tape.sum_all(y).unwrap();
        let grads = tape.backward(root).unwrap();
        assert_eq!(grads.get("x").unwrap().value().unwrap(), 6.0);
    }

    #[test]
    fn leaf_blocks_gradient_flow() {
        let tape = Tape::new();
        let p = Parameter::new("x", Tensor::scalar(2.0));
        let x = tape.param(&p);
        let detached = tape.leaf(tape.value(x));
        let y = tape.mul(detached, detached).unwrap();
        let root = tape.sum_all(y).unwrap();
        let grads = tape.backward(root).unwrap();
        assert!(grads.get("x").is_none(), "detached path must not reach the parameter");
    }

    #[test]
    fn unreached_params_get_no_gradient() {
        let tape = Tape::new();
        let a = Parameter::new("a", Tensor::scalar(1.0));
        let b = Parameter::new("b", Tensor::scalar(5.0));
        let av = tape.param(&a);
        let _bv = tape.param(&b);
        let root = tape.sum_all(av).unwrap();
        let grads = tape.backward(root).unwrap();
        assert!(grads.get("a").is_some());
        assert!(grads.get("b").is_none());
    }

    #[test]
    fn elementwise_gradients_match_finite_differences() {
        let shape = Shape::new(1, 2, 3, 4);
        assert!(fd_check_unary(shape, 10, |t, x| t.sigmoid(x)).passed());
        assert!(fd_check_unary(shape, 11, |t, x| t.leaky_relu(x, 0.2)).passed());
        assert!(fd_check_unary(shape, 12, |t, x| t.softplus(x)).passed());
        assert!(fd_check_unary(shape, 13, |t, x| t.affine(x, -1.7, 0.4)).passed());
        // Shift inputs positive so ln stays defined under perturbation.
        assert!(fd_check_unary(shape, 14, |t, x| {
            let shifted = t.affine(x, 1.0, 3.0)?;
            t.ln(shifted)
        })
        .passed());
        // Pooling needs dims divisible by the window: 4x4 -> 8x8 -> 2x2.
        let pool_shape = Shape::new(1, 2, 4, 4);
        assert!(fd_check_unary(pool_shape, 15, |t, x| t.avg_pool2d(t.upsample_bilinear(x, 2)?, 4))
            .passed());
    }

    #[test]
    fn conv_chain_gradient_matches_finite_differences() {
        let shape = Shape::new(1, 2, 5, 5);
        let w0 = rand_t(Shape::new(3, 2, 3, 3), 20);
        let wc = w0.clone();
        assert!(fd_check_unary(shape, 21, move |t, x| {
            let w = t.leaf(wc.clone());
            let y = t.conv2d(x, w, None, 1, 1)?;
            t.sigmoid(y)
        })
        .passed());

        // And through the weights of a transposed conv.
        let x0 = rand_t(Shape::new(1, 3, 4, 4), 22);
        let w_init = rand_t(Shape::new(3, 2, 4, 4), 23);
        let p = Parameter::new("w", w_init.clone());
        let tape = Tape::new();
        let xl = tape.leaf(x0.clone());
        let wv = tape.param(&p);
        let y = tape.conv2d_transposed(xl, wv, None, 2, 1).unwrap();
        let root = tape.mean_all(y).unwrap();
        let analytic = tape.backward(root).unwrap().get("w").unwrap().data().to_vec();
        let mut f = |vals: &[f64]| -> crate::error::Result<f64> {
            let t = Tape::new();
            let xl = t.leaf(x0.clone());
            let wl = t.leaf(Tensor::new(w_init.shape(), vals.to_vec())?);
            let y = t.conv2d_transposed(xl, wl, None, 2, 1)?;
            t.value(t.mean_all(y)?).value()
        };
        let report = check_gradient(&mut f, w_init.data(), &analytic).unwrap();
        assert!(report.passed(), "transposed conv weight grad: {report:?}");
    }

    #[test]
    fn prelu_slope_gradient_matches_finite_differences() {
        let x0 = rand_t(Shape::new(1, 2, 4, 4), 30);
        let slope0 = 0.25;
        let p = Parameter::new("slope", Tensor::scalar(slope0));
        let tape = Tape::new();
        let x = tape.leaf(x0.clone());
        let s = tape.param(&p);
        let y = tape.prelu(x, s).unwrap();
        let root = tape.mean_all(y).unwrap();
        let analytic = tape.backward(root).unwrap().get("slope").unwrap().value().unwrap();
        let mut f = |vals: &[f64]| -> crate::error::Result<f64> {
            let t = Tape::new();
            let x = t.leaf(x0.clone());
            let s = t.leaf(Tensor::scalar(vals[0]));
            let y = t.prelu(x, s)?;
            t.value(t.mean_all(y)?).value()
        };
        let report = check_gradient(&mut f, &[slope0], &[analytic]).unwrap();
        assert!(report.passed(), "prelu slope grad: {report:?}");
    }

    #[test]
    fn concat_split_gradients_route_to_the_right_slices() {
        let a0 = rand_t(Shape::new(1, 2, 2, 2), 40);
        let b0 = rand_t(Shape::new(1, 3, 2, 2), 41);
        let pa = Parameter::new("a", a0);
        let pb = Parameter::new("b", b0);
        let tape = Tape::new();
        let a = tape.param(&pa);
        let b = tape.param(&pb);
        let cat = tape.concat_channels(a, b).unwrap();
        // Only the first slice feeds the root; b must get zero gradient
        // through the sliced-out path, i.e. no entry at all.
        let (first, _second) = tape.split_channels(cat, 2).unwrap();
        let root = tape.sum_all(first).unwrap();
        let grads = tape.backward(root).unwrap();
        assert!(grads.get("a").unwrap().data().iter().all(|&v| v == 1.0));
        let gb = grads.get("b").unwrap();
        assert!(gb.data().iter().all(|&v| v == 0.0), "b only reaches the root through a zeroed slice");
    }

    #[test]
    fn clamp_gradient_is_zero_outside_band() {
        let x0 = Tensor::new(Shape::new(1, 1, 1, 3), vec![-0.5, 0.5, 1.5]).unwrap();
        let p = Parameter::new("x", x0);
        let tape = Tape::new();
        let x = tape.param(&p);
        let y = tape.clamp(x, 0.0, 1.0).unwrap();
        let root = tape.sum_all(y).unwrap();
        let g = tape.backward(root).unwrap();
        assert_eq!(g.get("x").unwrap().data(), &[0.0, 1.0, 0.0]);
    }
}

//! Dense rank-4 tensors in NCHW layout, the value half of the math core.
//!
//! A [`Tensor`] is an immutable f64 array behind an `Arc`, so clones are
//! cheap and values can be shared across the autodiff tape and between
//! threads. All math lives in [`ops`] (pure functions) and [`tape`]
//! (recorded, differentiable versions of the same functions).

pub mod ops;
pub mod tape;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Shape of a rank-4 tensor: batch, channels, height, width.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    /// The 1x1x1x1 shape used for scalar results (losses, metrics).
    pub fn scalar() -> Self {
        Shape::new(1, 1, 1, 1)
    }

    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_scalar(&self) -> bool {
        self.len() == 1
    }

    /// Flat index of element (n, c, i, j). Row-major NCHW.
    #[inline]
    pub fn index(&self, n: usize, c: usize, i: usize, j: usize) -> usize {
        ((n * self.c + c) * self.h + i) * self.w + j
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Immutable dense rank-4 tensor of f64 values.
#[derive(Clone, Debug)]
pub struct Tensor {
    shape: Shape,
    data: Arc<Vec<f64>>,
}

impl Tensor {
    /// Wraps raw data in a tensor. The data length must match the shape.
    /// Values are taken as-is; operations, not constructors, enforce
    /// finiteness so tests can stage non-finite inputs deliberately.
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::InvalidArgument {
                op: "Tensor::new",
                detail: format!("shape {} wants {} values, got {}", shape, shape.len(), data.len()),
            });
        }
        Ok(Tensor { shape, data: Arc::new(data) })
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor { shape, data: Arc::new(vec![0.0; shape.len()]) }
    }

    pub fn full(shape: Shape, value: f64) -> Self {
        Tensor { shape, data: Arc::new(vec![value; shape.len()]) }
    }

    /// A 1x1x1x1 tensor holding one value.
    pub fn scalar(value: f64) -> Self {
        Tensor::full(Shape::scalar(), value)
    }

    /// Builds a tensor by evaluating `f` at every (n, c, i, j).
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for n in 0..shape.n {
            for c in 0..shape.c {
                for i in 0..shape.h {
                    for j in 0..shape.w {
                        data.push(f(n, c, i, j));
                    }
                }
            }
        }
        Tensor { shape, data: Arc::new(data) }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shape.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Element at (n, c, i, j).
    #[inline]
    pub fn at(&self, n: usize, c: usize, i: usize, j: usize) -> f64 {
        self.data[self.shape.index(n, c, i, j)]
    }

    /// The single value of a scalar tensor.
    pub fn value(&self) -> Result<f64> {
        if !self.shape.is_scalar() {
            return Err(Error::InvalidArgument {
                op: "Tensor::value",
                detail: format!("expected scalar shape, got {}", self.shape),
            });
        }
        Ok(self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute difference to another tensor of the same shape.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op: "max_abs_diff",
                detail: format!("{} vs {}", self.shape, other.shape),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

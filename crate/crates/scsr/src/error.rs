use thiserror::Error;

/// Crate-wide error type. Every fallible public operation returns one of
/// these; panics are reserved for internal logic bugs.
#[derive(Debug, Error)]
pub enum Error {
    /// Two tensors (or an image pair) that must agree in shape do not.
    /// Carries both shapes so the message is actionable.
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    /// A size, stride, or other argument is out of contract.
    #[error("{op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },

    /// An operation produced (or was handed) a NaN or infinity.
    #[error("{op}: non-finite value encountered")]
    NonFinite { op: &'static str },

    /// `backward` was called on a tensor that is not 1x1x1x1.
    #[error("backward: root must be a scalar tensor, got {shape}")]
    NonScalarRoot { shape: String },

    #[error("image: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    /// Training abort: a loss term stopped being finite.
    #[error("training diverged at iteration {iteration}: loss term `{term}` is non-finite")]
    Diverged { term: String, iteration: u64 },

    #[error("metric: {0}")]
    Metric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

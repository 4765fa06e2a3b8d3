//! Crate-wide error type.

use crate::optim::TrainTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A network specification violates a structural rule (dimension chaining,
    /// missing output layer, bad batch-norm constants, ...).
    #[error("invalid network specification: {0}")]
    Spec(String),

    /// Tensor or vector dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Train-mode batch normalization needs at least two rows to form batch
    /// statistics.
    #[error("batch of size {got} is too small for train-mode batch norm (need >= 2)")]
    InvalidBatch { got: usize },

    /// A layer produced a non-finite activation or gradient.
    #[error("non-finite value produced by layer {layer}")]
    NumericOverflow { layer: usize },

    /// A non-finite value outside the layer stack (gradients fed to an
    /// optimizer, oracle outputs, ...).
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// Training loss became non-finite. Carries the trace up to the last
    /// finite iterate, whose `best` checkpoint is still usable.
    #[error("training diverged at epoch {epoch}; last finite iterate retained")]
    Diverged { epoch: usize, trace: Box<TrainTrace> },

    /// Binary dataset file is malformed. `offset` is the byte position of the
    /// field that failed validation.
    #[error("{path}: format error at byte {offset}: {message}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },

    /// The normal-equations matrix was numerically rank deficient.
    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),

    /// Brute-force vertex enumeration only supports small dimensions.
    #[error("vertex enumeration limited to p <= {limit}, got p = {got}")]
    SizeLimit { got: usize, limit: usize },

    /// A scalar argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An experiment configuration is invalid or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for configuration problems, 2 for
    /// runtime and numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Spec(_) | Error::Json(_) => 1,
            _ => 2,
        }
    }
}

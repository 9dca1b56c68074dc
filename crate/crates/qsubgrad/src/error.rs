//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by grid construction, graph generation, the iteration
/// loop, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A quantizer grid was requested with unusable parameters.
    #[error("invalid quantizer grid: {0}")]
    InvalidGrid(String),

    /// A value escaped the interval it was supposed to be quantized on.
    /// This indicates a bug upstream: projection must precede quantization.
    #[error("value {value} outside quantizer interval [{lower}, {upper}]")]
    OutOfInterval { value: f64, lower: f64, upper: f64 },

    /// Vector length does not match the expected dimension.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Random geometric graph generation never produced a connected graph.
    #[error("no connected graph after {attempts} attempts (n={n}, radius={radius})")]
    Disconnected { n: usize, radius: f64, attempts: usize },

    /// The singular value routine hit its iteration cap.
    #[error("singular value decomposition did not converge")]
    SpectralFailure,

    /// A configuration value violates its documented invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A runtime invariant of the iteration was violated.
    #[error("invariant `{invariant}` violated at round {round}: {detail}")]
    InvariantBreach {
        invariant: &'static str,
        round: u64,
        detail: String,
    },

    /// The reference optimal value is zero, so relative error is undefined.
    #[error("reference value f* is zero within tolerance; relative error unusable")]
    ZeroReference,

    /// An operation that needs the reference solution was called without one.
    #[error("problem instance has no reference solution; run the reference solver first")]
    MissingReference,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON document: {0}")]
    Json(#[from] serde_json::Error),

    /// A persisted file (adjacency list, data CSV) failed to parse.
    #[error("malformed {kind} file at line {line}: {detail}")]
    Parse {
        kind: &'static str,
        line: usize,
        detail: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::lp::SolverStats;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("LP solver did not converge ({reason}) after {} separation rounds", stats.rounds)]
    Solver { reason: String, stats: SolverStats },

    #[error("model error: {0}")]
    Model(String),

    #[error("graph sampling failed: {0}")]
    Sampling(String),

    #[error("instance too large for exhaustive search: n = {n} exceeds cap {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("re-certification failed: min margin {margin:e} at A = {a}")]
    Recertification { a: f64, margin: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported extension degree p = {0} (supported: 1..=16)")]
    UnsupportedDegree(u32),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("graph construction failed (seed {seed}): {reason}")]
    Construction { seed: u64, reason: String },

    #[error("inconsistent recovery: row {row} of check {check} is violated")]
    Integrity { check: usize, row: u32 },

    #[error("too many unknowns for dense elimination: {unknowns} > {limit}")]
    SizeGuard { unknowns: usize, limit: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

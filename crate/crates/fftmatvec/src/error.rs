use std::path::PathBuf;

use crate::precision::Precision;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid precision config {input:?}: {reason}")]
    ParseConfig { input: String, reason: ConfigParseError },

    #[error("invalid problem dimensions: {0}")]
    InvalidDims(String),

    #[error("{what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{what}: expected {expected:?} precision, got {actual:?}")]
    PrecisionMismatch {
        what: &'static str,
        expected: Precision,
        actual: Precision,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid gemv arguments: {0}")]
    Shape(String),

    #[error("dense oracle refused: n_d*n_m*n_t^2 = {work} exceeds {limit}")]
    OracleTooLarge { work: u128, limit: u128 },

    #[error("elapsed time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("reference vector has zero norm")]
    ZeroNormReference,

    #[error("no configuration satisfies rel_error <= {0:e}")]
    NoFeasibleConfig(f64),

    #[error("cannot split {n_m} parameter columns over {workers} workers")]
    TooManyWorkers { workers: usize, n_m: usize },

    #[error("vector file {}: {kind}", path.display())]
    VectorFile { path: PathBuf, kind: FormatError },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigParseError {
    #[error("expected 5 characters, got {0}")]
    Length(usize),
    #[error("invalid character {found:?} at position {position} (expected 'd' or 's')")]
    Char { position: usize, found: char },
}

/// Problems decoding the binary vector format.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic (expected \"FMV1\")")]
    BadMagic,
    #[error("truncated header: {0} bytes, need 44")]
    TruncatedHeader(usize),
    #[error("{field} code {value} out of range")]
    CodeOutOfRange { field: &'static str, value: u64 },
    #[error("truncated/oversized payload: header implies {expected} bytes, found {actual}")]
    PayloadSize { expected: u128, actual: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

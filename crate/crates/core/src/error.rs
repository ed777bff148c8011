use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt WAV header: {0}")]
    CorruptHeader(String),
    #[error("input too short: {samples} samples, need at least {needed}")]
    InputTooShort { samples: usize, needed: usize },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("non-finite value: {0}")]
    NonFiniteValue(String),
    #[error("insufficient data: {rows} rows, need at least {needed}")]
    InsufficientData { rows: usize, needed: usize },
    #[error("covariance is not positive definite")]
    SingularCovariance,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("numerical anomaly: {0}")]
    NumericalAnomaly(String),
    #[error("empty input")]
    EmptyInput,
    #[error("metric failed in cell ({len_a}, {len_b}): {failed} of {trials} trials errored")]
    MetricFailure {
        len_a: usize,
        len_b: usize,
        failed: usize,
        trials: usize,
    },
    #[error("degenerate correction surface: lookup returned {0}")]
    DegenerateSurface(f64),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("invalid cluster count k={k} for {leaves} leaves")]
    InvalidK { k: usize, leaves: usize },
    #[error("segment id mismatch: {0}")]
    IdMismatch(String),
    #[error("subset of {requested} rows requested from {available}")]
    SubsetTooLarge { requested: usize, available: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("pair ({a}, {b}) failed: {source}")]
    PairFailure {
        a: String,
        b: String,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

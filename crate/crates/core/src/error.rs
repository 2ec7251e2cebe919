use thiserror::Error;

use crate::model::ModelKind;

/// Errors raised by the library. Every variant is a domain error: the CLI maps
/// all of them to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid null specification: {0}")]
    InvalidSpec(String),

    #[error("invalid constant ledger: {0}")]
    InvalidConstants(String),

    #[error("t must lie in [1, 2], got {0}")]
    ExponentOutOfRange(f64),

    #[error("dimension mismatch: expected {expected} coordinates, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("observation out of range: {0}")]
    OutOfRange(String),

    #[error("{kind:?} null cannot ingest {found} observations")]
    WrongObservationKind { kind: ModelKind, found: &'static str },

    #[error("at least two observations are required for the split statistics, got n = {0}")]
    TooFewSamples(u64),

    #[error("the bulk is empty (A = 0); the bulk statistic is not defined")]
    EmptyBulk,

    #[error("prior is not defined for this null: {0}")]
    PriorUndefined(String),

    #[error("perturbation leaves the parameter space: {0}")]
    Infeasible(String),

    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),

    #[error("fixed-point search failed to bracket: {0}")]
    Bracket(String),

    #[error("matrix is not a symmetric probability matrix: {0}")]
    InvalidMatrix(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T> = std::result::Result<T, Error>;

use crate::matrix::Kind;

/// Errors raised anywhere in the library.
#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix dimension must be at least 1")]
    EmptyMatrix,
    #[error("expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("row {row} sums to {sum} (deviation {deviation:e})")]
    RowSumViolation { row: usize, sum: f64, deviation: f64 },
    #[error("column {col} sums to {sum} (deviation {deviation:e})")]
    ColumnSumViolation { col: usize, sum: f64, deviation: f64 },
    #[error("vector entries sum to {sum}, not 1")]
    NotProbabilityVector { sum: f64 },
    #[error("time order violated: to={to} < from={from}")]
    TimeOrder { from: usize, to: usize },
    #[error("matrix sequence has no matrices")]
    EmptySequence,
    #[error("expected a {expected} matrix, found {found}")]
    KindMismatch { expected: Kind, found: Kind },
    #[error("backward limit did not reach tau < {tol:e} within {max_factors} factors (t0={t0}, tau={tau:e})")]
    NoConvergence { t0: usize, max_factors: usize, tau: f64, tol: f64 },
    #[error("absolute probability vectors need a passing A1 report: {0}")]
    PreconditionA1(String),
    #[error("nonpositive mass y_{agent}({t}) = {value}")]
    NonpositiveMass { t: usize, agent: usize, value: f64 },
    #[error("mass mismatch at agent {agent}: A*y = {expected}, y_next = {found}")]
    MassMismatch { agent: usize, expected: f64, found: f64 },
    #[error("nonpositive step denominator pi_{agent}({t}) + eps = {value}")]
    NonpositiveDenominator { t: usize, agent: usize, value: f64 },
    #[error("time {t} beyond materialized horizon {horizon}")]
    HorizonExceeded { t: usize, horizon: usize },
    #[error("no minimizer oracle registered for this problem")]
    OracleUnavailable,
    #[error("non-finite state at t={t}, agent {agent}, coordinate {coord}")]
    NonFiniteState { t: usize, agent: usize, coord: usize },
    #[error("diagonal divisor z_{agent}{agent}({t}) = {value:e} is too small")]
    ZeroDiagonalDivisor { t: usize, agent: usize, value: f64 },
    #[error("no embedding available for algorithm `{0}`")]
    EmbeddingUnavailable(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

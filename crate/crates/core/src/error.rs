use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid factor model: {0}")]
    InvalidModel(String),
    #[error("member universe is empty")]
    EmptyUniverse,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate conditioning variance {0}")]
    DegenerateConditioning(f64),
    #[error("matrix is not symmetric positive semi-definite: {0}")]
    NotPositiveSemiDefinite(String),
    #[error("grid needs {needed} evaluations, above the guard of {limit}")]
    GridTooLarge { needed: u128, limit: u128 },
    #[error("function evaluation failed at {coords:?}")]
    EvaluationFailed { coords: Vec<f64> },
    #[error("grid axis {axis} does not straddle threshold {threshold}")]
    GridNotStraddling { axis: usize, threshold: f64 },
    #[error("sample is empty")]
    EmptySample,
    #[error("reference member defaults on every path")]
    NoSurvivors,
    #[error("need at least 2 batches, got {0}")]
    TooFewBatches(usize),
    #[error("default fund allocation undefined: {0}")]
    AllocationUndefined(String),
    #[error("reference member {0} has zero default fund contribution")]
    ZeroReferenceDefaultFund(usize),
    #[error("config error: {0}")]
    Config(String),
    #[error("every grid cell is invalid")]
    AllCellsInvalid,
    #[error("no comparable cell pairs")]
    NoComparablePairs,
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

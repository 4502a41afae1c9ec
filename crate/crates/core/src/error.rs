use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("requested {m} medoids from {n} points")]
    TooManyMedoids { m: usize, n: usize },
    #[error("number of scenarios must be positive")]
    BadM,
    #[error("no observation crosses the threshold {0}")]
    EmptyScenarioSet(f64),
    #[error("decision outside the feasible set: {0}")]
    InfeasibleDecision(String),
    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),
    #[error("cell enumeration needs {cells} cells, budget is {budget}")]
    CellBudgetExceeded { cells: f64, budget: usize },
    #[error("iteration cap reached with certificate gap {gap:e} (best value {value})")]
    MaxIterWithCertificateGap {
        point: Vec<f64>,
        value: f64,
        gap: f64,
    },
    #[error("mode unavailable: {0}")]
    ModeUnavailable(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("problem is infeasible")]
    Infeasible,
    #[error("big-M for coordinate {index} is {value}, must be at least {required}")]
    BadBigM {
        index: usize,
        value: f64,
        required: f64,
    },
    #[error("grid too coarse: {reason} (value {value})")]
    GridWarning { value: f64, reason: String },
    #[error("multiplier at bound {lambda:e} after widening")]
    BoundaryWarning { lambda: f64 },
    #[error("training atom {0} lies on the loss kink")]
    KinkDegenerate(usize),
    #[error("quadrature failed to converge (estimate {estimate}, error {error:e})")]
    QuadFailure { estimate: f64, error: f64 },
    #[error("parse error at line {line}{}: {msg}", col.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        line: usize,
        col: Option<usize>,
        msg: String,
    },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

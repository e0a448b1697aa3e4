use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {function} is not defined at t = {value}")]
    Domain { function: String, value: f64 },

    #[error("function is not provably nondecreasing: {0}")]
    NotMonotone(String),

    #[error("function is bounded above on [0, inf): {0}")]
    NotUnbounded(String),

    #[error("zero eigenvalue paired with an infinite (truncated) model floods the tensor product at 0")]
    ZeroAmbiguity,

    #[error("operation requires a nonnegative spectrum, found eigenvalue {0}")]
    NegativeEigenvalue(f64),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("format error at line {line}, column {column}: {message}")]
    Format {
        message: String,
        line: usize,
        column: usize,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error(
        "evaluator is not monotone on rank-one inputs: h({lambda_lo}) = {h_lo} > h({lambda_hi}) = {h_hi}"
    )]
    NonMonotoneEvaluator {
        lambda_lo: f64,
        h_lo: f64,
        lambda_hi: f64,
        h_hi: f64,
    },

    #[error("profile vanishes identically on the grid")]
    DegenerateProfile,

    #[error("grid point {lambda} exceeds the reliable range {limit} of a truncated model")]
    GridBeyondTruncation { lambda: f64, limit: f64 },

    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("spectral preorder fails at k = {k}: {lhs} > {rhs}")]
    PreorderNotEstablished { k: u64, lhs: f64, rhs: f64 },

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("{0}")]
    Io(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format {
            message: e.to_string(),
            line: e.line(),
            column: e.column(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Format {
            message: e.to_string(),
            line,
            column: 0,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

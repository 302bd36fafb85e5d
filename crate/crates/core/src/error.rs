use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("translation offset {offset:?} is not a multiple of {step} grid cells")]
    NonLatticeShift { offset: Vec<i64>, step: usize },

    #[error("zero field")]
    ZeroField,

    #[error("degenerate centroid on axis {axis}: resultant {resultant:.3e}")]
    DegenerateCentroid { axis: usize, resultant: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("eigen-iteration did not converge after {iterations} iterations: best lambda {lambda:.10e}, residual {residual:.3e}")]
    EigenNoConvergence {
        iterations: usize,
        lambda: f64,
        residual: f64,
        best_iterate: Vec<f64>,
    },

    #[error("fiber root not bracketed: psi stayed {psi_at_cap:.3e} at t = {t_cap:.3e}")]
    BracketFailure { t_cap: f64, psi_at_cap: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("decay fit: {0}")]
    DecayFit(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for NlsError {
    fn from(e: std::io::Error) -> Self {
        NlsError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, NlsError>;

use thiserror::Error;

/// Errors raised by the solvers and model constructors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("negative entry in {0}")]
    Negative(String),

    #[error("{what}: row sums deviate from the target by {residual:.3e}")]
    NotStochastic { what: String, residual: f64 },

    #[error("{0} is reducible")]
    Reducible(String),

    #[error("{} closed communicating classes found: {classes:?}", classes.len())]
    MultipleClosedClasses { classes: Vec<Vec<usize>> },

    #[error("mean level drift is not negative (sigma = {0})")]
    NotPositiveRecurrent(f64),

    #[error(
        "{what} did not converge after {iterations} iterations (last residual {residual:.3e})"
    )]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("divergent series: {0}")]
    Divergent(String),

    #[error("window too small: need K >= {required}")]
    WindowTooSmall { required: usize },

    #[error("{what}: consistency residual {residual:.3e} exceeds {tolerance:.1e}")]
    Inconsistent {
        what: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("out of domain: {0}")]
    Domain(String),

    #[error("method not applicable: {0}")]
    Inapplicable(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

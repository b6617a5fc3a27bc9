use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate geometry: all sites share the same coordinates")]
    DegenerateGeometry,

    #[error("validation error at ({row}, {col}): {message}")]
    Validation {
        row: usize,
        col: usize,
        message: String,
    },

    #[error(
        "no positive spatial dependence: the centered proximity matrix has no positive eigenvalue"
    )]
    NoPositiveEigenvalue,

    #[error("extension requires kernel basis")]
    ExtensionRequiresKernel,

    #[error("rank-deficient design: collinear columns {0:?}")]
    RankDeficient(Vec<String>),

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:.3e}, best objective {best_value})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        best_value: f64,
        best_params: Vec<f64>,
    },

    #[error("non-finite value in {context} at parameters {params:?}")]
    NonFinite { context: String, params: Vec<f64> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

use thiserror::Error;

/// Errors produced by the estimation, forecasting and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quantile level {tau} at position {index} is outside (0, 1)")]
    InvalidQuantile { index: usize, tau: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("GiG parameters (p={p}, a={a}, b={b}) are outside the existence region")]
    GigRegion { p: f64, a: f64, b: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("matrix is not positive definite (condition number estimate {condition:.3e})")]
    NotPositiveDefinite { condition: f64 },

    #[error("rejection sampler exceeded {cap} attempts: {context}")]
    RejectionCap { cap: usize, context: String },

    #[error("MCMC diverged at iteration {iteration} in block {block}")]
    Divergence { iteration: usize, block: String },

    #[error("GARCH variance recursion overflowed at t={t} for series {series}")]
    VarianceOverflow { series: usize, t: usize },

    #[error("long-run variance of the loss differential is zero")]
    DegenerateVariance,

    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("missing model '{0}'")]
    MissingModel(String),

    #[error("misaligned records: {0}")]
    Misaligned(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True when the error reflects a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature(_)
                | Error::NotPositiveDefinite { .. }
                | Error::RejectionCap { .. }
                | Error::Divergence { .. }
                | Error::VarianceOverflow { .. }
                | Error::DegenerateVariance
        )
    }

    /// True for filesystem and CSV transport failures.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_))
    }
}

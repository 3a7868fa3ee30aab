use thiserror::Error;

/// Errors raised anywhere in the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid parameter or configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature or iteration failed to reach its tolerance.
    #[error("numerical error in {context}: achieved estimate {achieved:e}")]
    Numerical { context: String, achieved: f64 },

    /// A caller-side contract (symmetry, certificate, ...) was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A size limit was exceeded.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// The angular-momentum basis disagrees with the Landau operator.
    #[error("basis convention error: residual {residual:e} for (q={q}, k={k})")]
    Convention { q: u32, k: i64, residual: f64 },

    /// An integration-domain truncation dominates the reported value.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// The requested evaluation method does not apply to the input.
    #[error("method error: {0}")]
    Method(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn numerical(context: impl Into<String>, achieved: f64) -> Self {
        Error::Numerical {
            context: context.into(),
            achieved,
        }
    }
}

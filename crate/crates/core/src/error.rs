use thiserror::Error;

/// Errors raised by the model, the simulator and the experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The closed-form model only covers non-delay-tolerant classes.
    #[error("out of analytic scope: {0}")]
    Scope(String),

    #[error("D2D budget {budget_j:e} J outside reachable range [{min_j:e}, {max_j:e}] J")]
    BudgetRange { budget_j: f64, min_j: f64, max_j: f64 },

    #[error(
        "quadrature did not converge on [{lower}, {upper}] with {nodes} nodes \
         (last change {last_change:e}, tolerance {tolerance:e})"
    )]
    Quadrature {
        lower: f64,
        upper: f64,
        nodes: usize,
        last_change: f64,
        tolerance: f64,
    },

    #[error("invalid configuration at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 1 for usage/validation problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Quadrature { .. } | Error::BudgetRange { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

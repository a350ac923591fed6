use thiserror::Error;

/// Errors surfaced by the solvers and the matrix layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: iteration limit of {limit} reached")]
    IterationLimit { what: &'static str, limit: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigendecomposition did not converge within {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },

    #[error("KKT screen/refit loop exceeded {limit} rounds at lambda = {lambda}")]
    KktLoopLimit { limit: usize, lambda: f64 },

    #[error("covariance cache would need {requested} entries, budget is {budget}")]
    MemoryBudgetExceeded { requested: usize, budget: usize },

    #[error("loss evaluated to a non-finite value ({value})")]
    NonFiniteLoss { value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Short machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::IterationLimit { .. } => "IterationLimit",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::ConvergenceFailure { .. } => "ConvergenceFailure",
            Error::KktLoopLimit { .. } => "KktLoopLimit",
            Error::MemoryBudgetExceeded { .. } => "MemoryBudgetExceeded",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

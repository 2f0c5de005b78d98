use thiserror::Error;

/// Errors raised by models, level laws, estimators and the study harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("payoff for decision `{decision}` is not finite at x = {x:?}")]
    NonFinitePayoff { decision: String, x: Vec<f64> },

    /// The first drawn level already costs more than the whole budget.
    #[error("budget {budget} exhausted: first draw costs {first_cost}")]
    BudgetExhausted { budget: u64, first_cost: u64 },

    #[error("degenerate level profile: {0}")]
    DegenerateProfile(String),

    #[error("invalid model config: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

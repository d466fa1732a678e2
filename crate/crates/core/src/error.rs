use thiserror::Error;

/// Errors raised by the optimizers, validators and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid spanning set: {0}")]
    InvalidSet(String),
    #[error("invalid step size {0}: must be finite and > 0")]
    InvalidStep(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid probability {0}: must lie in (1/2, 1)")]
    InvalidProbability(f64),
    #[error("invalid regularization {0}: lambda must be > 0")]
    InvalidRegularization(f64),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("budget exhausted after {iterations} iterations and {oracle_calls} oracle calls")]
    BudgetExhausted { iterations: u64, oracle_calls: u64 },
    #[error("infeasible constants: {0}")]
    InfeasibleConstants(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("diverged at epoch {epoch}: iterate norm {norm:e}")]
    Diverged { epoch: usize, norm: f64 },
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("field has zero mass")]
    ZeroMass,
    #[error("singular linear system at row {0}")]
    Singular(usize),
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no bracket found: {0}")]
    NoBracket(String),
    #[error("bracket does not straddle the threshold: {0}")]
    NotStraddling(String),
    #[error("did not converge: {0}")]
    NoConvergence(String),
    #[error("step size underflow at r = {0}")]
    StepUnderflow(f64),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("malformed field file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

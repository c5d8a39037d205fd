use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot parse rational from {0:?}")]
    ParseRational(String),

    #[error("division by zero")]
    DivisionByZero,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid lottery: {0}")]
    InvalidLottery(String),

    #[error("invalid edge point: {0}")]
    InvalidEdge(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("agent {agent}: {reason}")]
    InvalidAgent { agent: usize, reason: String },

    #[error("agent index {agent} out of range (n = {n})")]
    AgentOutOfRange { agent: usize, n: usize },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("internal logic error: {0}")]
    InternalLogic(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid advice: {0}")]
    InvalidAdvice(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("edge per fill undefined: both the jump rate and the side rate are zero")]
    UndefinedEdge,
    #[error("invalid relative price: {0}")]
    InvalidRelPrice(String),
    #[error("state outside the truncated state space: {0}")]
    StateOutOfSpace(String),
    #[error("action {action} not admissible in state {state}")]
    Inadmissible { state: String, action: String },
    #[error("reachability violation: {0}")]
    Unreachable(String),
    #[error("truncation too small: {0}")]
    Truncation(String),
    #[error("policy error: {0}")]
    Policy(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

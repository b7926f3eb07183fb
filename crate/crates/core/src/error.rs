use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("numeric overflow: {0}")]
    Overflow(String),
    #[error("infeasible problem: {0}")]
    Infeasible(String),
    #[error("unsupported loss: {0}")]
    UnsupportedLoss(String),
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty retained set: every variable fell below the screening threshold {tau}")]
    EmptyRetainedSet { tau: f64 },

    #[error("infeasible credible level: total mass {total} is below lambda = {lambda}")]
    Infeasible { total: f64, lambda: f64 },

    #[error("singular model: {0}")]
    Singular(String),

    #[error("enumeration bound exceeded: p = {p} but at most {max} is supported")]
    EnumerationBound { p: usize, max: usize },

    #[error("report schema mismatch: expected {expected}, found {found}")]
    Schema { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("incomplete trace: {0}")]
    IncompleteTrace(String),
    #[error("infeasible allocation at t={time}: {reason}")]
    Feasibility { time: String, reason: String },
    #[error("scheduler contract violated: {0}")]
    Contract(String),
    #[error("runaway simulation: more than {0} events")]
    Runaway(usize),
    #[error("obliviousness violation: {0}")]
    Obliviousness(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("scheduler unavailable: {0}")]
    Unavailable(String),
    #[error("unknown scheduler {0:?}")]
    UnknownScheduler(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("not strictly convex: {0}")]
    NotStrictlyConvex(String),

    #[error("weight too slowly growing / not unbounded: {0}")]
    NotUnbounded(String),

    #[error(
        "exponent collision at k={k}: e_k={current} does not exceed e_(k-1)={previous}; \
         move x0 closer to 0"
    )]
    ExponentCollision { k: usize, previous: u64, current: u64 },

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("adjustment failed, refine grids: {0}")]
    AdjustmentFailed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An enumeration or state-space guard was exceeded. Guards keep every
    /// operation at desk scale; callers may relax them via [`crate::game::Limits`].
    #[error("guard exceeded: {what} ({actual} > {limit})")]
    Guard { what: &'static str, limit: u64, actual: u64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidGame(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn guard(what: &'static str, limit: u64, actual: u64) -> Self {
        Error::Guard { what, limit, actual }
    }
}

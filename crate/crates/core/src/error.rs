use thiserror::Error;

/// Errors produced by the estimation toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Every candidate was ruled out by a zero-probability outcome.
    #[error("no candidate is consistent with the recorded outcomes")]
    ImpossibleEvidence,

    #[error("position {0} is not contained in any measurement set")]
    UncoveredPosition(usize),

    #[error("{count} candidates exceeds the enumeration guard of {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("{0} overflows 64 bits")]
    Overflow(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

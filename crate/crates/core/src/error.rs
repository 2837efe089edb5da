use thiserror::Error;

/// Errors raised while validating or evaluating the attribution game.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("invalid cluster distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid bottom table: {0}")]
    InvalidTable(String),

    #[error("{spans} spans exceed the exact-enumeration cap of {cap}")]
    Capacity { spans: usize, cap: usize },

    #[error("span index {index} out of range for {spans} spans")]
    SpanOutOfRange { index: usize, spans: usize },

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
}

pub type Result<T, E = GameError> = std::result::Result<T, E>;

use alloc::string::String;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),
    /// A policy tree is missing a node or refers to a missing head.
    #[error("malformed policy tree: {0}")]
    Structure(String),
    /// Input vector length does not match what a head expects.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    /// The Holenstein grid cannot represent the distribution.
    #[error("degenerate sampling resolution: {0}")]
    DegenerateResolution(String),
    /// A loss or parameter became non-finite during training.
    #[error("non-finite value during training: {0}")]
    NonFinite(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

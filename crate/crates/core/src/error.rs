use alloc::string::String;
use core::fmt;

/// Errors reported by the core pipeline operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    InvalidInput(&'static str),
    /// Two paired inputs disagree on length or dimension.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A coordinate or feature value is NaN or infinite.
    NonFinite { what: &'static str, index: usize },
    /// Pearson correlation is undefined when one input has zero variance.
    ZeroVariance,
    /// A feature provider failed to produce features for a block.
    Provider(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::DimensionMismatch {
                what,
                expected,
                got,
            } => write!(f, "dimension mismatch in {what}: expected {expected}, got {got}"),
            Error::NonFinite { what, index } => {
                write!(f, "non-finite value in {what} at index {index}")
            }
            Error::ZeroVariance => write!(f, "correlation undefined: zero-variance input"),
            Error::Provider(msg) => write!(f, "feature provider: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

use thiserror::Error;

/// Dimensions of a cube as (height, width, bands).
pub type Dims = (usize, usize, usize);

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Dims, found: Dims },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error("divergence at iteration {iteration} during {update}-update")]
    Divergence { iteration: usize, update: &'static str },

    #[error("missing weight tensor `{0}`")]
    MissingWeight(String),

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    /// Process exit code: 1 for assertion/divergence failures, 2 for usage and format errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } | Error::Assertion(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

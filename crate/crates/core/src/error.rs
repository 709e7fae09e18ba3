use thiserror::Error;

/// Errors produced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(
        "generation failed after {attempts} attempts: best delta_{d} = {achieved}, required >= {required}"
    )]
    GenerationFailure {
        attempts: usize,
        d: usize,
        achieved: u64,
        required: f64,
    },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("certificate violated: {0}")]
    Certificate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Config(_) => "configuration",
            Error::Parse { .. } => "parse",
            Error::GenerationFailure { .. } => "generation-failure",
            Error::Resource(_) => "resource",
            Error::Infeasible(_) => "infeasible",
            Error::Sampling(_) => "sampling-failure",
            Error::Certificate(_) => "certificate",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

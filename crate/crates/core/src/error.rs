use thiserror::Error;

pub type Result<T> = std::result::Result<T, HcubError>;

#[derive(Debug, Error)]
pub enum HcubError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown context: {0}")]
    UnknownContext(String),

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("internal consistency: {0}")]
    InternalConsistency(String),

    #[error("feedback failed: {0}")]
    Feedback(String),

    #[error("config `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("log line {line}: {message}")]
    Log { line: usize, message: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl HcubError {
    /// Stable, machine-parseable error class used by the CLI.
    pub fn class(&self) -> &'static str {
        match self {
            HcubError::InvalidArgument(_) => "invalid-argument",
            HcubError::UnknownContext(_) => "unknown-context",
            HcubError::InvalidObservation(_) => "invalid-observation",
            HcubError::InternalConsistency(_) => "internal-consistency",
            HcubError::Feedback(_) => "feedback",
            HcubError::Config { .. } => "config",
            HcubError::Log { .. } => "log",
            HcubError::Io(_) => "io",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        HcubError::InvalidArgument(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        HcubError::InternalConsistency(msg.into())
    }
}

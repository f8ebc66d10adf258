use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum FnmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric error: {message}")]
    Numeric {
        message: String,
        /// Offending point, when one is known.
        node: Option<Vec<f64>>,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl FnmError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        FnmError::InvalidArgument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        FnmError::Numeric {
            message: msg.into(),
            node: None,
        }
    }

    /// Short machine-readable tag, used in study CSV status fields.
    pub fn code(&self) -> &'static str {
        match self {
            FnmError::InvalidArgument(_) => "invalid_argument",
            FnmError::Numeric { .. } => "numeric",
            FnmError::Unsupported(_) => "unsupported",
            FnmError::Config(_) => "config",
            FnmError::Parse(_) => "parse",
            FnmError::Io(_) => "io",
        }
    }

    pub fn numeric_at(msg: impl Into<String>, node: &[f64]) -> Self {
        FnmError::Numeric {
            message: msg.into(),
            node: Some(node.to_vec()),
        }
    }
}

impl From<std::io::Error> for FnmError {
    fn from(e: std::io::Error) -> Self {
        FnmError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FnmError>;

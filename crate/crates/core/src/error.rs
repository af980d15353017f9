use std::path::PathBuf;

use gradtape::TensorError;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error in {source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    /// Stable single-word category, printed by the command line on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Tensor(t) => match t {
                TensorError::Dimension { .. } => "dimension",
                TensorError::Config(_) => "config",
                TensorError::Numeric { .. } => "numeric",
                TensorError::Contract(_) => "contract",
                TensorError::DegenerateBatch { .. } => "data",
                TensorError::Checkpoint(_) => "checkpoint",
            },
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Numeric(_) => "numeric",
        }
    }
}

/// Parse error for a TOML document, positioned at the offending line.
pub(crate) fn toml_error(source_name: &str, text: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    let msg = e
        .message()
        .lines()
        .next()
        .unwrap_or("invalid document")
        .to_string();
    Error::parse(source_name, line, msg)
}

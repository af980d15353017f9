use thiserror::Error;

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error at coordinate {index}: {detail}")]
    Numeric { index: usize, detail: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("degenerate batch in {op}: {detail}")]
    DegenerateBatch { op: &'static str, detail: String },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

impl TensorError {
    pub fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        TensorError::Dimension {
            op,
            detail: detail.into(),
        }
    }
}

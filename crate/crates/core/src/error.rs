use thiserror::Error;
use tinynn::NnError;

pub type Result<T> = std::result::Result<T, GloveError>;

#[derive(Debug, Error)]
pub enum GloveError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("unknown gesture {0}")]
    Lookup(String),
    #[error("singular capacitor: plate distance {0} mm")]
    Singularity(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GloveError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        GloveError::Parameter(msg.into())
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        GloveError::Format { what, detail: detail.into() }
    }
}

use std::path::{Path, PathBuf};

use capglove::GloveError;
use thiserror::Error;
use tinynn::NnError;

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("stream protocol: {0}")]
    Protocol(String),
    #[error("numeric fault: {0}")]
    Numeric(String),
    #[error(transparent)]
    Glove(GloveError),
}

impl PipelineError {
    /// Process exit status: 2 configuration, 3 I/O or protocol, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Io { .. } | PipelineError::Protocol(_) => 3,
            PipelineError::Numeric(_) => 4,
            PipelineError::Glove(g) => match g {
                GloveError::Io(_) | GloveError::Format { .. } => 3,
                GloveError::Singularity(_) => 4,
                GloveError::Nn(NnError::NumericFault { .. }) => 4,
                GloveError::Nn(NnError::Io(_) | NnError::Format(_)) => 3,
                _ => 2,
            },
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), source }
    }
}

impl From<GloveError> for PipelineError {
    fn from(e: GloveError) -> Self {
        PipelineError::Glove(e)
    }
}

impl From<NnError> for PipelineError {
    fn from(e: NnError) -> Self {
        PipelineError::Glove(GloveError::Nn(e))
    }
}

/// Attaches `path` to I/O failures from the core library.
pub(crate) fn at(path: &Path) -> impl FnOnce(GloveError) -> PipelineError + '_ {
    move |e| match e {
        GloveError::Io(source) => PipelineError::io(path, source),
        GloveError::Nn(NnError::Io(source)) => PipelineError::io(path, source),
        GloveError::Format { what, detail } => {
            PipelineError::Glove(GloveError::Format { what, detail: format!("{}: {detail}", path.display()) })
        }
        other => PipelineError::Glove(other),
    }
}

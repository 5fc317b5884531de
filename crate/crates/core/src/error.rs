use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the tracking library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("resource error ({path}): {reason}")]
    Resource { path: PathBuf, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("numerical error in component {component}: {reason}")]
    Numerical { component: usize, reason: String },

    #[error("mixture is empty, no estimate available")]
    NoEstimate,

    #[error("detector has no trained model")]
    NoModel,

    #[error("every scale level was skipped")]
    NoScale,

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("frame {frame}: {source}")]
    AtFrame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_frame(self, frame: usize) -> Self {
        Error::AtFrame { frame, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

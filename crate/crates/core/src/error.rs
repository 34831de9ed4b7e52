use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid clip {clip}: {message}")]
    InvalidClip { clip: String, message: String },

    #[error("degenerate pose in clip {clip}: limb {limb} has zero length at frame {frame}")]
    DegeneratePose { clip: String, frame: usize, limb: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("rule {stimulus} -> {response} cannot be satisfied: {message}")]
    UnsatisfiableRule { stimulus: String, response: String, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("training diverged in {stage} at epoch {epoch}: non-finite loss")]
    Divergence { stage: &'static str, epoch: usize },

    #[error("degenerate kernel bandwidth for instance {index}: projected sigma has zero norm")]
    DegenerateBandwidth { index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}

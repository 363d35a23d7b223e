use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tsidec::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("model file {path} at byte {offset}: {message}")]
    Model { path: PathBuf, offset: u64, message: String },
    #[error("self-check failed: {0}")]
    SelfCheck(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(tsidec::Error::InvalidInput(_)) => "invalid_input",
            CliError::Core(tsidec::Error::InvalidParameter(_)) => "invalid_parameter",
            CliError::Core(tsidec::Error::InvalidShape(_)) => "invalid_shape",
            CliError::Core(tsidec::Error::DegenerateCluster(_)) => "degenerate_cluster",
            CliError::Core(tsidec::Error::DivergenceUndefined(_)) => "divergence_undefined",
            CliError::Core(tsidec::Error::TrainingDiverged { .. }) => "training_diverged",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Config(_) => "config",
            CliError::Model { .. } => "model_format",
            CliError::SelfCheck(_) => "self_check",
            CliError::Json(_) => "json",
        }
    }

    /// `{"error": {"kind": …, "message": …}}` on one line.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Inner<'a> {
            kind: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct Outer<'a> {
            error: Inner<'a>,
        }
        serde_json::to_string(&Outer {
            error: Inner {
                kind: self.kind(),
                message: self.to_string(),
            },
        })
        .unwrap_or_else(|_| String::from("{\"error\":{\"kind\":\"internal\",\"message\":\"unserializable error\"}}"))
    }
}

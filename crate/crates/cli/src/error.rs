use std::path::PathBuf;

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A manifest field or flag is missing or unusable.
    #[error("{field}: {reason}")]
    Config { field: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] dynfuse::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "ConfigError",
            CliError::Io { .. } => "IoError",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "ConfigError" | "UnknownStrategy" | "InvalidSpec" | "MissingGroundTruth" => 2,
            _ => 1,
        }
    }

    /// The error as a single JSON object for stderr.
    pub fn to_json(&self) -> Value {
        let mut body = json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            CliError::Config { field, .. } => body["field"] = json!(field),
            CliError::Io { path, .. } => body["path"] = json!(path),
            CliError::Core(
                dynfuse::Error::Io { path, .. }
                | dynfuse::Error::Json { path, .. }
                | dynfuse::Error::Csv { path, .. }
                | dynfuse::Error::ShapeMismatch { path, .. }
                | dynfuse::Error::CorruptHeader { path, .. },
            ) => body["path"] = json!(path),
            CliError::Core(_) => {}
        }
        json!({ "error": body })
    }
}

pub type CliResult<T> = Result<T, CliError>;

use std::path::PathBuf;

use serde_json::json;

/// Exit codes of the command line tool.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { message: String, line: usize, column: usize },
    #[error("invalid value for `{key}`: {reason}")]
    Value { key: String, reason: String },
    #[error(transparent)]
    Core(#[from] rapidgate_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Syntax { .. } => "config-syntax",
            CliError::Value { .. } => "config-value",
            CliError::Core(rapidgate_core::Error::Invalid { .. }) => "invariant",
            CliError::Core(_) => "computation",
            CliError::Io { .. } => "io",
            CliError::Csv(_) => "csv",
            CliError::Manifest(_) => "manifest",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_ERROR,
        }
    }

    /// Single-line JSON record for stderr.
    pub fn to_json(&self) -> String {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            CliError::Syntax { line, column, .. } => {
                v["line"] = json!(line);
                v["column"] = json!(column);
            }
            CliError::Value { key, .. } => v["key"] = json!(key),
            CliError::Core(rapidgate_core::Error::Invalid { invariant }) => v["invariant"] = json!(invariant),
            CliError::Io { path, .. } => v["path"] = json!(path.display().to_string()),
            _ => {}
        }
        v.to_string()
    }
}

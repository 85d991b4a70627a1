use std::path::PathBuf;

use thiserror::Error;

/// Structured file-format errors; parse failures name the offending field
/// and byte offset (or PLY line).
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed header at byte {offset}: {detail}")]
    Header { offset: u64, detail: String },
    #[error("field `{field}` at byte {offset}: {detail}")]
    Field {
        field: &'static str,
        offset: u64,
        detail: String,
    },
    #[error("missing property `{property}` in PLY element `{element}`")]
    MissingProperty {
        element: &'static str,
        property: String,
    },
    #[error("PLY line {line}: {detail}")]
    Ply { line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] urbanseg_core::Error),
}

/// Command-level errors carrying the process exit code: 1 validation,
/// 2 I/O, 3 internal.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::File { .. } | CliError::Io(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn file(path: impl Into<PathBuf>, source: impl Into<FormatError>) -> Self {
        CliError::File {
            path: path.into(),
            source: source.into(),
        }
    }
}

impl From<urbanseg_core::Error> for CliError {
    fn from(err: urbanseg_core::Error) -> Self {
        CliError::Validation(err.to_string())
    }
}

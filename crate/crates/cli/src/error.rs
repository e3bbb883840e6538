use std::path::PathBuf;

/// Everything a command can fail with.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] diffchan_core::Error),
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("cannot parse config: {0}")]
    ConfigSyntax(#[from] toml::de::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint does not fit the config: `{field}` is {found} in the checkpoint, the config expects {expected}")]
    Mismatch { field: String, found: String, expected: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { field: field.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

/// Structural problems with a checkpoint file.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("format version {found}, this build reads {expected}")]
    Version { found: u32, expected: u32 },
    #[error("truncated: need {needed} bytes, file has {available}")]
    Truncated { needed: u64, available: u64 },
    #[error("{0} trailing bytes after the last array")]
    TrailingBytes(u64),
    #[error("bad header: {0}")]
    Header(String),
    #[error("checksum mismatch in array `{0}`")]
    Checksum(String),
    #[error("array `{name}` has shape {found:?}, expected {expected:?}")]
    Shape { name: String, found: Vec<usize>, expected: Vec<usize> },
    #[error("array `{0}` is missing")]
    Missing(String),
    #[error("array `{0}` is not used by the model")]
    Unexpected(String),
    #[error("expected a `{expected}` checkpoint, found `{found}`")]
    Kind { expected: String, found: String },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

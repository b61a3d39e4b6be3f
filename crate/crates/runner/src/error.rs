use thiserror::Error;

pub type Result<T> = std::result::Result<T, RunnerError>;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Core(#[from] qxe::Error),

    /// Every offending field, one message each.
    #[error("invalid config: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("cannot parse config: {0}")]
    ConfigSyntax(#[from] toml::de::Error),

    #[error("cannot serialize config: {0}")]
    ConfigWrite(#[from] toml::ser::Error),

    #[error("unknown preset `{0}` (expected one of {1})")]
    UnknownPreset(String, String),

    #[error("cannot read {path}: {source}")]
    Read { path: std::path::PathBuf, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

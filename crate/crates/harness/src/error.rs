use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error(transparent)]
    Core(#[from] minimax_core::Error),
    #[error("configs are not comparable: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

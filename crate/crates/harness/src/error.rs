use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] hawkeye_core::Error),

    #[error("scenario parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("scenario serialisation error: {0}")]
    TomlWrite(#[from] toml::ser::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

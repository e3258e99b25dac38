use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or shape mismatch between components.
    #[error("configuration error: {0}")]
    Config(String),

    /// A persisted artifact failed to decode or validate.
    #[error("decode error in `{field}`: {reason}")]
    Decode { field: String, reason: String },

    /// An operation was called in a state or with arguments it does not accept.
    #[error("usage error: {0}")]
    Usage(String),

    /// A brute-force enumeration would exceed the configured cap.
    #[error("enumeration cap exceeded: {joint_actions} joint actions > cap {cap}")]
    EnumerationCap { joint_actions: u128, cap: u128 },

    /// Training produced a non-finite loss.
    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn decode(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Decode {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

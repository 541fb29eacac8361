use std::path::{Path, PathBuf};

/// Problems with a scenario file or command-line overrides.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Offending field, when the error names one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            ConfigError::Parse(_) => None,
        }
    }
}

impl From<tether_core::Error> for ConfigError {
    fn from(e: tether_core::Error) -> Self {
        match e {
            tether_core::Error::InvalidParameter { field, reason } => ConfigError::invalid(field, reason),
            other => ConfigError::invalid("scenario", other.to_string()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("malformed telemetry in {path}: {reason}")]
    Telemetry { path: PathBuf, reason: String },
    #[error(transparent)]
    Core(tether_core::Error),
}

/// Invalid parameters are configuration errors; everything else happened
/// while running.
impl From<tether_core::Error> for SimError {
    fn from(e: tether_core::Error) -> Self {
        match e {
            tether_core::Error::InvalidParameter { .. } => SimError::Config(e.into()),
            other => SimError::Core(other),
        }
    }
}

impl SimError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        SimError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 for unusable inputs (configuration, files), 3 for
    /// errors raised while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Core(_) => 3,
            _ => 2,
        }
    }
}

//! Service configuration: a TOML file, then `QWB_DATA_DIR`, then flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use qwb_core::jobdata::DEFAULT_CHUNK_SIZE;
use serde::{Deserialize, Serialize};

pub const DATA_DIR_ENV: &str = "QWB_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    /// Entries per record on `/jobs/{id}/counts`.
    pub chunk_size: usize,
    pub timeout_secs: u64,
    /// Largest accepted request body, in MiB.
    pub max_body_mib: usize,
    /// Holds `jobs/` and an optional `machines/` directory of machine files.
    pub data_dir: PathBuf,
    /// Built UI assets served at `/`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: 8040,
            chunk_size: DEFAULT_CHUNK_SIZE,
            timeout_secs: 120,
            max_body_mib: 512,
            data_dir: PathBuf::from("qwb-data"),
            ui_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ServiceConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Applies `QWB_DATA_DIR` when it is set and non-empty.
    pub fn with_env(mut self) -> Self {
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV).filter(|d| !d.is_empty()) {
            self.data_dir = PathBuf::from(dir);
        }
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.chunk_size == 0 {
            return Err(ConfigError::Invalid("chunk_size must be at least 1".into()));
        }
        if self.timeout_secs == 0 {
            return Err(ConfigError::Invalid("timeout_secs must be at least 1".into()));
        }
        if self.max_body_mib == 0 {
            return Err(ConfigError::Invalid("max_body_mib must be at least 1".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn max_body_bytes(&self) -> usize {
        self.max_body_mib.saturating_mul(1 << 20)
    }

    pub fn jobs_dir(&self) -> PathBuf {
        self.data_dir.join("jobs")
    }

    pub fn machines_dir(&self) -> PathBuf {
        self.data_dir.join("machines")
    }
}

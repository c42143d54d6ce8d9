//! Service configuration: a TOML file, then environment overrides.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::upload::UploadLimits;

pub const ENV_BIND: &str = "DIELINK_BIND";
pub const ENV_DATA_DIR: &str = "DIELINK_DATA_DIR";
pub const ENV_TOKEN: &str = "DIELINK_TOKEN";
pub const ENV_WORKERS: &str = "DIELINK_WORKERS";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub bind: SocketAddr,
    pub data_dir: PathBuf,
    /// Bearer token every `/api` request must carry.
    pub token: String,
    /// Scoring threads; 0 means one per core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub limits: UploadLimits,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{var}={value:?} is not valid: {reason}")]
    Env {
        var: &'static str,
        value: String,
        reason: String,
    },
    #[error("auth token must not be empty")]
    EmptyToken,
    #[error("data directory {0} cannot be created: its parent does not exist")]
    MissingParent(PathBuf),
    #[error("data directory {path}: {source}")]
    DataDir {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Config {
    /// Reads `path`, applies `DIELINK_*` overrides and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text, |k| std::env::var(k).ok())
    }

    /// Parses TOML and overlays values from `env`.
    pub fn from_toml(text: &str, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse()?;
        for (key, var) in [("bind", ENV_BIND), ("data_dir", ENV_DATA_DIR), ("token", ENV_TOKEN)] {
            if let Some(v) = env(var) {
                table.insert(key.to_owned(), toml::Value::String(v));
            }
        }
        if let Some(raw) = env(ENV_WORKERS) {
            let n: i64 = raw.trim().parse().map_err(|e: std::num::ParseIntError| ConfigError::Env {
                var: ENV_WORKERS,
                value: raw.clone(),
                reason: e.to_string(),
            })?;
            table.insert("workers".into(), toml::Value::Integer(n));
        }
        let config: Config = table.try_into()?;
        if config.token.is_empty() {
            return Err(ConfigError::EmptyToken);
        }
        Ok(config)
    }

    /// Creates the data directory when only its last component is missing.
    pub fn ensure_data_dir(&self) -> Result<(), ConfigError> {
        let dir = &self.data_dir;
        if dir.is_dir() {
            return Ok(());
        }
        let parent = match dir.parent() {
            Some(p) if p.as_os_str().is_empty() => Path::new("."),
            Some(p) => p,
            None => return Err(ConfigError::MissingParent(dir.clone())),
        };
        if !parent.is_dir() {
            return Err(ConfigError::MissingParent(dir.clone()));
        }
        std::fs::create_dir(dir).map_err(|source| ConfigError::DataDir {
            path: dir.clone(),
            source,
        })
    }
}

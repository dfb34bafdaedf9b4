//! Parameter resolution: defaults, then an optional TOML file, then the
//! `CREWPLAN_TIMEOUT` environment variable, then command-line flags.

use std::path::Path;

use crewplan_core::session::SessionConfig;
use thiserror::Error;

pub const TIMEOUT_ENV: &str = "CREWPLAN_TIMEOUT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("bad config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{TIMEOUT_ENV} must be a positive number of seconds, got {0:?}")]
    BadEnv(String),
    #[error("{0}")]
    Invalid(String),
}

pub fn parse_config(text: &str) -> Result<SessionConfig, ConfigError> {
    Ok(toml::from_str(text)?)
}

pub fn load_config(path: Option<&Path>) -> Result<SessionConfig, ConfigError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|source| ConfigError::Read { path: p.display().to_string(), source })?;
            parse_config(&text)?
        }
        None => SessionConfig::default(),
    };
    if let Some(t) = env_timeout(std::env::var(TIMEOUT_ENV).ok().as_deref())? {
        cfg.timeout_secs = t;
    }
    Ok(cfg)
}

fn env_timeout(value: Option<&str>) -> Result<Option<f64>, ConfigError> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<f64>() {
            Ok(t) if t.is_finite() && t > 0.0 => Ok(Some(t)),
            _ => Err(ConfigError::BadEnv(v.to_string())),
        },
    }
}

//! Service configuration from a TOML file, overridden by `CORAE_*`
//! environment variables.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! data_dir = "data"
//! media_dir = "media"
//! static_dir = "dashboard/dist"
//! max_media_seconds = 600
//!
//! [scale]
//! min = -7
//! max = 7
//!
//! [policy]
//! interval_seconds = 1.0
//! log_on_change = true
//!
//! [detector]
//! window_seconds = 15
//! ```

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use corae_core::{DetectorConfig, RatingScale, SamplingPolicy};
use serde::Deserialize;
use thiserror::Error;

use crate::service::ServiceDefaults;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value {value:?} for {var}: {message}")]
    Env {
        var: &'static str,
        value: String,
        message: String,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub media_dir: PathBuf,
    /// Files served under `/static/` (the annotation dashboard bundle).
    pub static_dir: Option<PathBuf>,
    pub max_media_seconds: f64,
    pub scale: RatingScale,
    pub policy: SamplingPolicy,
    pub detector: DetectorConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let d = ServiceDefaults::default();
        ServiceConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: PathBuf::from("data"),
            media_dir: d.media_dir,
            static_dir: None,
            max_media_seconds: d.max_media_seconds,
            scale: d.scale,
            policy: d.policy,
            detector: d.detector,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` if given (defaults otherwise), then applies overrides
    /// from the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|source| ConfigError::Read { path: p.to_owned(), source })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    /// `CORAE_LISTEN`, `CORAE_DATA_DIR`, `CORAE_MEDIA_DIR`,
    /// `CORAE_STATIC_DIR`, `CORAE_MAX_MEDIA_SECONDS`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = var("CORAE_LISTEN") {
            self.listen = v.parse().map_err(|e: std::net::AddrParseError| ConfigError::Env {
                var: "CORAE_LISTEN",
                message: e.to_string(),
                value: v,
            })?;
        }
        if let Some(v) = var("CORAE_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = var("CORAE_MEDIA_DIR") {
            self.media_dir = v.into();
        }
        if let Some(v) = var("CORAE_STATIC_DIR") {
            self.static_dir = Some(v.into());
        }
        if let Some(v) = var("CORAE_MAX_MEDIA_SECONDS") {
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() && x > 0.0 => self.max_media_seconds = x,
                _ => {
                    return Err(ConfigError::Env {
                        var: "CORAE_MAX_MEDIA_SECONDS",
                        value: v,
                        message: "expected a positive number of seconds".into(),
                    })
                }
            }
        }
        Ok(())
    }

    pub fn defaults(&self) -> ServiceDefaults {
        ServiceDefaults {
            media_dir: self.media_dir.clone(),
            scale: self.scale.clone(),
            policy: self.policy,
            max_media_seconds: self.max_media_seconds,
            detector: self.detector.clone(),
        }
    }
}

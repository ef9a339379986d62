//! Runtime configuration. Sources are layered: command-line flags override
//! environment variables, which override the config file, which overrides
//! built-in defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::attributes::LayerGroups;
use crate::backend::{BackendKind, BridgeConfig};
use crate::mask::DEFAULT_FEATHER_PX;
use crate::session::CanvasGeometry;

pub const ENV_CONFIG: &str = "CANVAS_BLEND_CONFIG";
pub const ENV_BACKEND: &str = "CANVAS_BLEND_BACKEND";
pub const ENV_PORT: &str = "CANVAS_BLEND_PORT";
pub const ENV_DATA_DIR: &str = "CANVAS_BLEND_DATA_DIR";
pub const ENV_PYTHON: &str = "CANVAS_BLEND_PYTHON";
pub const ENV_ENCODER: &str = "CANVAS_BLEND_ENCODER";
pub const ENV_GENERATOR: &str = "CANVAS_BLEND_GENERATOR";
pub const ENV_PARSER: &str = "CANVAS_BLEND_PARSER";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid value for {key}: {message}")]
    Value { key: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub data_dir: PathBuf,
    /// Generation worker slots; defaults to 1 for the real backend and the
    /// CPU count for the synthetic one.
    pub workers: Option<usize>,
    pub synthetic_timeout_secs: u64,
    pub real_timeout_secs: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8787,
            data_dir: PathBuf::from("canvas-data"),
            workers: None,
            synthetic_timeout_secs: 5,
            real_timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct MaskConfig {
    pub feather_px: f32,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            feather_px: DEFAULT_FEATHER_PX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default)]
pub struct Config {
    pub backend: BackendKind,
    pub real: BridgeConfig,
    pub service: ServiceConfig,
    pub masks: MaskConfig,
    pub layer_groups: LayerGroups,
    pub canvas: CanvasGeometry,
}

impl Config {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// File (explicit path, else `$CANVAS_BLEND_CONFIG`, else none) with the
    /// process environment layered on top.
    pub fn load(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load_with(explicit, |k| std::env::var(k).ok())
    }

    pub fn load_with(
        explicit: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, ConfigError> {
        let file = explicit
            .map(Path::to_path_buf)
            .or_else(|| env(ENV_CONFIG).map(PathBuf::from));
        let mut config = match file {
            Some(path) => Self::from_file(&path)?,
            None => Self::default(),
        };
        config.apply_env(env)?;
        Ok(config)
    }

    pub fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = env(ENV_BACKEND) {
            self.backend = v.parse().map_err(|message| ConfigError::Value {
                key: ENV_BACKEND,
                message,
            })?;
        }
        if let Some(v) = env(ENV_PORT) {
            self.service.port = v.parse().map_err(|e| ConfigError::Value {
                key: ENV_PORT,
                message: format!("{e}"),
            })?;
        }
        if let Some(v) = env(ENV_DATA_DIR) {
            self.service.data_dir = v.into();
        }
        if let Some(v) = env(ENV_PYTHON) {
            self.real.python = v.into();
        }
        if let Some(v) = env(ENV_ENCODER) {
            self.real.encoder = Some(v.into());
        }
        if let Some(v) = env(ENV_GENERATOR) {
            self.real.generator = Some(v.into());
        }
        if let Some(v) = env(ENV_PARSER) {
            self.real.parser = Some(v.into());
        }
        Ok(())
    }

    pub fn generation_timeout(&self) -> Duration {
        Duration::from_secs(match self.backend {
            BackendKind::Synthetic => self.service.synthetic_timeout_secs,
            BackendKind::Real => self.service.real_timeout_secs,
        })
    }

    pub fn worker_slots(&self) -> usize {
        self.service.workers.unwrap_or(match self.backend {
            BackendKind::Real => 1,
            BackendKind::Synthetic => std::thread::available_parallelism().map_or(2, |n| n.get()),
        })
    }
}

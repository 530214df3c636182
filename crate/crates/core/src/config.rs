//! Run configuration, read from a single TOML file and validated up front.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closed_loop::{DriveConfig, RemoteSettings};
use crate::dynamics::{ActionCatalog, VehicleParams};
use crate::qa::dataset::QaConfig;
use crate::view::CameraRig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Directory of scenario JSON files.
    pub scenarios: Option<PathBuf>,
    /// Output directory.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    /// Required by randomized commands unless given on the command line.
    pub master: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    pub camera: CameraRig,
    /// Keep every observation PNG under the run directory.
    pub save_observations: bool,
}

impl Default for DriveSection {
    fn default() -> Self {
        Self {
            camera: CameraRig::closed_loop(),
            save_observations: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    /// Default remote endpoint, used by `--agent remote` without a URL.
    pub endpoint: Option<String>,
    pub timeout_s: f64,
    pub retries: u32,
}

impl Default for AgentSection {
    fn default() -> Self {
        let r = RemoteSettings::default();
        Self {
            endpoint: None,
            timeout_s: r.timeout_s,
            retries: r.retries,
        }
    }
}

impl AgentSection {
    pub fn remote(&self) -> RemoteSettings {
        RemoteSettings {
            timeout_s: self.timeout_s,
            retries: self.retries,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub paths: Paths,
    pub seeds: Seeds,
    pub qa: QaConfig,
    pub vehicle: VehicleParams,
    pub actions: ActionCatalog,
    pub drive: DriveSection,
    pub agent: AgentSection,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, parses and validates; relative paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.paths.scenarios, &mut cfg.paths.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |section: &str, m: String| ConfigError::Invalid(format!("[{section}] {m}"));
        self.qa.validate().map_err(|m| bad("qa", m))?;
        self.vehicle.validate().map_err(|e| bad("vehicle", e.to_string()))?;
        self.actions.validate().map_err(|e| bad("actions", e.to_string()))?;
        if self.actions.len() > 26 {
            return Err(bad("actions", "at most 26 actions can be lettered".into()));
        }
        self.drive.camera.validate().map_err(|m| bad("drive.camera", m))?;
        if !(self.agent.timeout_s > 0.0 && self.agent.timeout_s.is_finite()) {
            return Err(bad("agent", "timeout_s must be positive".into()));
        }
        if let Some(url) = &self.agent.endpoint {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return Err(bad("agent", format!("endpoint `{url}` is not an http(s) URL")));
            }
        }
        Ok(())
    }

    pub fn drive_config(&self, observation_dir: Option<PathBuf>) -> DriveConfig {
        DriveConfig {
            vehicle: self.vehicle.clone(),
            catalog: self.actions.clone(),
            vocab: self.qa.vocab.clone(),
            visibility: self.qa.visibility.clone(),
            camera: self.drive.camera.clone(),
            observation_dir: observation_dir.filter(|_| self.drive.save_observations),
        }
    }
}

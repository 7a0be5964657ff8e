//! Mission configuration file (TOML).
//!
//! ```toml
//! seed = 7
//!
//! [mission]
//! goals = [{ lon = -5.60, lat = 56.45 }, { lon = -5.40, lat = 56.50 }]
//! rho = 2000.0
//! rho_wpt = 7000.0
//! n_bck = 2
//! action_set = [-40.0, -20.0, 0.0, 20.0, 40.0]
//!
//! [mission.controls]
//! n_yos = 5
//! z_bottom = 95.0
//!
//! [data]
//! field = "field.ogf"
//! bathy = "bathy.ogf"
//! # sim_params = "fitted.json"
//!
//! [planner]
//! n_trials = 5000
//! n_threads = 8
//!
//! [service]
//! transport = "stdio"
//! state_dir = "state"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divesim::{FlightTable, SimParams};
use crate::envfield::{load_bathy, load_field, Bathymetry, CurrentField, EnvError};
use crate::mission::MissionConfig;
use crate::planner::PlannerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Failure to load data a valid configuration points at.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Env { path: PathBuf, source: EnvError },
    #[error("{path}: {message}")]
    Params { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub field: PathBuf,
    pub bathy: PathBuf,
    /// JSON file with fitted simulator parameters.
    #[serde(default)]
    pub sim_params: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    #[default]
    Stdio,
    Tcp,
}

fn default_listen() -> String {
    "127.0.0.1:7878".into()
}

fn default_state_dir() -> PathBuf {
    PathBuf::from("state")
}

fn default_budget() -> f64 {
    300.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    #[serde(default)]
    pub transport: Transport,
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default = "default_state_dir")]
    pub state_dir: PathBuf,
    /// Wall-clock planning budget per surfacing (s).
    #[serde(default = "default_budget")]
    pub planning_budget_secs: f64,
    /// Gliders served from the start, all flying `mission`.
    #[serde(default)]
    pub gliders: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            transport: Transport::Stdio,
            listen: default_listen(),
            state_dir: default_state_dir(),
            planning_budget_secs: default_budget(),
            gliders: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppConfig {
    #[serde(default)]
    pub seed: u64,
    pub mission: MissionConfig,
    pub data: DataConfig,
    /// Inline simulator parameters; exclusive with `data.sim_params`.
    #[serde(default)]
    pub sim: Option<SimParams>,
    #[serde(default)]
    pub flight: FlightTable,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub service: ServiceConfig,
}

impl AppConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: AppConfig = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.data.field);
        resolve(&mut cfg.data.bathy);
        if let Some(p) = cfg.data.sim_params.as_mut() {
            resolve(p);
        }
        resolve(&mut cfg.service.state_dir);
        // the mission's instruction set and bearings drive the planner
        cfg.planner.controls = cfg.mission.controls.clone();
        cfg.planner.action_set = cfg.mission.action_set.clone();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.mission.validate().map_err(|e| invalid(&e))?;
        self.planner.validate().map_err(|e| invalid(&e))?;
        if let Some(p) = &self.sim {
            p.validate().map_err(|e| invalid(&e))?;
        }
        if self.sim.is_some() && self.data.sim_params.is_some() {
            return Err(ConfigError::Invalid("give simulator parameters inline or as a file, not both".into()));
        }
        if !(self.service.planning_budget_secs > 0.0) {
            return Err(ConfigError::Invalid("planning_budget_secs must be positive".into()));
        }
        Ok(())
    }

    /// Simulator parameters from the inline table, the referenced file, or
    /// the noise-free default.
    pub fn sim_params(&self) -> Result<SimParams, DataError> {
        if let Some(p) = self.sim {
            return Ok(p);
        }
        let Some(path) = &self.data.sim_params else {
            return Ok(SimParams::deterministic());
        };
        let err = |message: String| DataError::Params { path: path.clone(), message };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let p: SimParams = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        p.validate().map_err(|e| err(e.to_string()))?;
        Ok(p)
    }

    pub fn load_environment(&self) -> Result<(CurrentField, Bathymetry), DataError> {
        let field =
            load_field(&self.data.field).map_err(|source| DataError::Env { path: self.data.field.clone(), source })?;
        let bathy =
            load_bathy(&self.data.bathy).map_err(|source| DataError::Env { path: self.data.bathy.clone(), source })?;
        Ok((field, bathy))
    }
}

//! Message-driven planning service.
//!
//! Every line on the wire is one JSON object with a `type` field.
//!
//! Inbound:
//! - `platform_status`: `glider_id`, `lat`, `lon`, `timestamp` (s) and an
//!   optional `active_waypoint_index`.
//! - `planning_configuration`: `glider_id` and `mission` (a mission
//!   configuration object). This starts, or restarts, the glider's mission.
//!
//! Outbound, for each accepted status, in this order:
//! - `mission_plan`: `glider_id`, `timestamp`, `waypoints` (list of `lat`,
//!   `lon`), `source` and, after a planner failure, `fallback_reason`.
//! - `instruction_set`: `glider_id`, `timestamp`, `controls`.
//!
//! A rejected message yields a single `rejected` reply with a `reason` and
//! leaves all state untouched. Configurations are answered with `accepted`.
//!
//! Per-glider state is persisted as `<state_dir>/<glider_id>.json` before
//! replies are sent. A status identical to the last one processed, as after a
//! crash between persisting and replying, gets the stored replies again.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divesim::{ControlParams, DiveSimulator, FlightTable, SimParams};
use crate::envfield::{Bathymetry, CurrentField};
use crate::geo::{GeoPosition, SurfaceState};
use crate::mission::{next_instruction, MissionConfig, MissionState, PlanSource};
use crate::planner::PlannerConfig;
use crate::seed;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("state directory {path}: {source}")]
    State { path: PathBuf, source: std::io::Error },
    #[error("corrupt state file {path}: {message}")]
    CorruptState { path: PathBuf, message: String },
    #[error("{0}")]
    Rejected(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformStatus {
    pub glider_id: String,
    pub lat: f64,
    pub lon: f64,
    pub timestamp: f64,
    #[serde(default)]
    pub active_waypoint_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningConfiguration {
    pub glider_id: String,
    pub mission: MissionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Inbound {
    PlatformStatus(PlatformStatus),
    PlanningConfiguration(PlanningConfiguration),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionPlanMsg {
    pub glider_id: String,
    pub timestamp: f64,
    pub waypoints: Vec<Waypoint>,
    pub source: PlanSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionSetMsg {
    pub glider_id: String,
    pub timestamp: f64,
    pub controls: ControlParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outbound {
    MissionPlan(MissionPlanMsg),
    InstructionSet(InstructionSetMsg),
    Accepted { glider_id: String },
    Rejected { glider_id: Option<String>, reason: String },
}

/// Everything persisted for one glider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GliderRecord {
    pub glider_id: String,
    pub mission: MissionConfig,
    /// Created from the first status.
    pub state: Option<MissionState>,
    pub last_status: Option<PlatformStatus>,
    pub last_replies: Vec<Outbound>,
}

/// Static inputs shared by all gliders.
pub struct ServiceSetup {
    pub field: CurrentField,
    pub bathy: Bathymetry,
    pub params: SimParams,
    pub flight: FlightTable,
    /// Planner settings; `time_budget_secs` is the per-surfacing budget.
    pub planner: PlannerConfig,
    pub seed: u64,
    pub state_dir: PathBuf,
}

pub struct Service {
    setup: ServiceSetup,
    gliders: Mutex<BTreeMap<String, Arc<Mutex<GliderRecord>>>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn rejected(glider_id: Option<&str>, reason: impl Into<String>) -> Vec<Outbound> {
    vec![Outbound::Rejected { glider_id: glider_id.map(str::to_string), reason: reason.into() }]
}

impl Service {
    /// Opens the service, restoring any gliders persisted in the state
    /// directory.
    pub fn open(setup: ServiceSetup) -> Result<Self, ServiceError> {
        let dir = &setup.state_dir;
        std::fs::create_dir_all(dir).map_err(|source| ServiceError::State { path: dir.clone(), source })?;
        let mut gliders = BTreeMap::new();
        let entries = std::fs::read_dir(dir).map_err(|source| ServiceError::State { path: dir.clone(), source })?;
        for entry in entries {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let text = std::fs::read_to_string(&path)?;
            let rec: GliderRecord = serde_json::from_str(&text)
                .map_err(|e| ServiceError::CorruptState { path: path.clone(), message: e.to_string() })?;
            gliders.insert(rec.glider_id.clone(), Arc::new(Mutex::new(rec)));
        }
        Ok(Service { setup, gliders: Mutex::new(gliders) })
    }

    pub fn glider_ids(&self) -> Vec<String> {
        self.gliders.lock().unwrap().keys().cloned().collect()
    }

    pub fn record(&self, glider_id: &str) -> Option<GliderRecord> {
        let g = self.gliders.lock().unwrap().get(glider_id).cloned()?;
        let rec = g.lock().unwrap().clone();
        Some(rec)
    }

    fn state_path(&self, glider_id: &str) -> PathBuf {
        self.setup.state_dir.join(format!("{glider_id}.json"))
    }

    fn persist(&self, rec: &GliderRecord) -> Result<(), ServiceError> {
        let path = self.state_path(&rec.glider_id);
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(rec).expect("state serializes");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Starts `mission` for `glider_id`, replacing any previous mission.
    /// With `keep_existing`, a glider that already has state is left alone.
    pub fn configure(&self, glider_id: &str, mission: MissionConfig, keep_existing: bool) -> Result<(), ServiceError> {
        if !valid_id(glider_id) {
            return Err(ServiceError::Rejected(format!("invalid glider_id {glider_id:?}")));
        }
        mission.validate().map_err(|e| ServiceError::Rejected(e.to_string()))?;
        let mut map = self.gliders.lock().unwrap();
        if keep_existing && map.contains_key(glider_id) {
            return Ok(());
        }
        let rec = GliderRecord {
            glider_id: glider_id.to_string(),
            mission,
            state: None,
            last_status: None,
            last_replies: Vec::new(),
        };
        match map.get(glider_id) {
            Some(slot) => {
                let mut cur = slot.lock().unwrap();
                self.persist(&rec)?;
                *cur = rec;
            }
            None => {
                self.persist(&rec)?;
                map.insert(glider_id.to_string(), Arc::new(Mutex::new(rec)));
            }
        }
        Ok(())
    }

    /// Parses and handles one wire line.
    pub fn handle_line(&self, line: &str) -> Vec<Outbound> {
        match serde_json::from_str::<Inbound>(line) {
            Ok(msg) => self.handle(msg),
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("glider_id").and_then(|g| g.as_str()).map(str::to_string));
                rejected(id.as_deref(), format!("malformed message: {e}"))
            }
        }
    }

    pub fn handle(&self, msg: Inbound) -> Vec<Outbound> {
        match msg {
            Inbound::PlanningConfiguration(c) => match self.configure(&c.glider_id, c.mission, false) {
                Ok(()) => vec![Outbound::Accepted { glider_id: c.glider_id }],
                Err(e) => rejected(Some(&c.glider_id), e.to_string()),
            },
            Inbound::PlatformStatus(s) => self.handle_status(s),
        }
    }

    fn handle_status(&self, status: PlatformStatus) -> Vec<Outbound> {
        let id = status.glider_id.clone();
        let pos = GeoPosition { lon: status.lon, lat: status.lat };
        if !pos.is_valid() || !status.timestamp.is_finite() {
            return rejected(Some(&id), "invalid position or timestamp");
        }
        let Some(slot) = self.gliders.lock().unwrap().get(&id).cloned() else {
            return rejected(Some(&id), format!("unknown glider {id:?}"));
        };
        // one status at a time per glider
        let mut rec = slot.lock().unwrap();
        if let Some(last) = &rec.last_status {
            if *last == status {
                return rec.last_replies.clone();
            }
            if status.timestamp <= last.timestamp {
                return rejected(
                    Some(&id),
                    format!("stale status: timestamp {} is not after {}", status.timestamp, last.timestamp),
                );
            }
        }

        let surfacing = SurfaceState::new(pos, status.timestamp);
        let mut next = rec.clone();
        let state = next.state.get_or_insert_with(|| MissionState::new(surfacing));
        let s = &self.setup;
        let sim = DiveSimulator::new(&s.field, &s.bathy, s.params, &s.flight);
        let plan_seed = seed::derive(s.seed, &[seed::hash_str(&id), status.timestamp.to_bits()]);
        let (ins, err) = next_instruction(
            state,
            surfacing,
            status.active_waypoint_index,
            &next.mission,
            &s.planner,
            &sim,
            plan_seed,
        );
        let replies = vec![
            Outbound::MissionPlan(MissionPlanMsg {
                glider_id: id.clone(),
                timestamp: status.timestamp,
                waypoints: ins.waypoints.iter().map(|p| Waypoint { lat: p.lat, lon: p.lon }).collect(),
                source: ins.source,
                fallback_reason: err.map(|e| e.to_string()),
            }),
            Outbound::InstructionSet(InstructionSetMsg {
                glider_id: id.clone(),
                timestamp: status.timestamp,
                controls: ins.controls,
            }),
        ];
        next.last_status = Some(status);
        next.last_replies = replies.clone();
        if let Err(e) = self.persist(&next) {
            return rejected(Some(&id), format!("could not persist state: {e}"));
        }
        *rec = next;
        replies
    }
}

fn write_replies<W: Write>(w: &mut W, replies: &[Outbound]) -> std::io::Result<()> {
    for r in replies {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Serves newline-delimited messages from `input` until it closes.
pub fn serve_lines<R: BufRead, W: Write>(service: &Service, input: R, mut output: W) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        write_replies(&mut output, &service.handle_line(&line))?;
    }
    Ok(())
}

/// Accepts connections forever, one thread per connection.
pub fn serve_tcp(service: Arc<Service>, listener: TcpListener) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let service = Arc::clone(&service);
        std::thread::spawn(move || {
            if let Err(e) = serve_connection(&service, stream) {
                eprintln!("connection closed: {e}");
            }
        });
    }
    Ok(())
}

fn serve_connection(service: &Service, stream: TcpStream) -> std::io::Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    serve_lines(service, reader, stream)
}

/// Path of a glider's state file.
pub fn state_file(state_dir: &Path, glider_id: &str) -> PathBuf {
    state_dir.join(format!("{glider_id}.json"))
}

//! Simulator calibration from logged dives: dataset handling and cleaning,
//! the KDE-based score J and a derivative-free optimizer over the simulator
//! parameter box.

mod hparams;
mod optim;
mod score;

pub use hparams::{mean_planner_duration, optimize_planner_hparams, HparamConfig, HparamResult, PlannerBounds};

pub use optim::{
    optimize, optimize_with, split_dataset, CalibResult, CrossEntropy, CrossEntropyConfig, OptimizeConfig, Optimizer,
    ParamBounds,
};
pub use score::{kde_log_density, score, scott_bandwidth, Bandwidth, ScoreConfig};

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::Rng;

use crate::divesim::{Action, ControlParams, DiveSimulator, SimError};
use crate::envfield::{Bathymetry, CurrentField};
use crate::geo::{angle_diff_deg, bearing, geodesic_distance, heading_from_action, GeoPosition, SurfaceState};
use crate::seed;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("dataset too small: {0} records, need at least {1}")]
    DatasetTooSmall(usize, usize),
    #[error("record {record}: all {samples} samples coincide, KDE bandwidth is zero")]
    DegenerateKde { record: usize, samples: usize },
    #[error("record {record}: {source}")]
    Simulation { record: usize, source: SimError },
    #[error("record {record} references unknown environment {name:?}")]
    UnknownEnvironment { record: usize, name: String },
    #[error("parameter bounds are empty or invalid: {0}")]
    EmptyBounds(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dive file line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Normal,
    Abort,
    Other,
}

/// A logged dive: conditions before it started and where it surfaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiveRecord {
    pub start: SurfaceState,
    pub action: Action,
    /// Bearing to the goal at the start (degrees).
    pub beta: f64,
    /// Name of the current field in effect.
    pub field: String,
    pub bathy: String,
    pub true_post: SurfaceState,
    pub termination: Termination,
}

impl DiveRecord {
    pub fn commanded_heading(&self) -> f64 {
        heading_from_action(self.action.alpha, self.beta)
    }

    pub fn duration(&self) -> f64 {
        self.true_post.time - self.start.time
    }

    /// Mean ground speed (m/s).
    pub fn ground_speed(&self) -> f64 {
        geodesic_distance(self.start.position, self.true_post.position) / self.duration()
    }
}

/// Fields and bathymetries referenced by records, keyed by name.
#[derive(Debug, Default)]
pub struct Environments {
    pub fields: BTreeMap<String, CurrentField>,
    pub bathys: BTreeMap<String, Bathymetry>,
}

impl Environments {
    pub fn single(name: &str, field: CurrentField, bathy: Bathymetry) -> Self {
        let mut e = Environments::default();
        e.fields.insert(name.to_string(), field);
        e.bathys.insert(name.to_string(), bathy);
        e
    }

    pub(crate) fn lookup(&self, i: usize, r: &DiveRecord) -> Result<(&CurrentField, &Bathymetry), CalibError> {
        let unknown = |name: &str| CalibError::UnknownEnvironment { record: i, name: name.to_string() };
        let f = self.fields.get(&r.field).ok_or_else(|| unknown(&r.field))?;
        let b = self.bathys.get(&r.bathy).ok_or_else(|| unknown(&r.bathy))?;
        Ok((f, b))
    }
}

/// Heading mismatch above which a dive is discarded (degrees).
pub const HEADING_MISMATCH_DEG: f64 = 75.0;
/// Speed outlier threshold in standard deviations.
pub const SPEED_SIGMAS: f64 = 2.0;

/// Drops abnormal terminations, dives whose surfacing bearing is more than
/// 75 degrees off the commanded heading, and ground-speed outliers beyond two
/// standard deviations. The speed rule is repeated until nothing changes, so
/// cleaning a cleaned dataset is a no-op.
pub fn clean_dataset(records: &[DiveRecord]) -> Result<Vec<DiveRecord>, CalibError> {
    if records.len() < 3 {
        return Err(CalibError::DatasetTooSmall(records.len(), 3));
    }
    let mut kept: Vec<DiveRecord> = records
        .iter()
        .filter(|r| r.termination == Termination::Normal && r.duration() > 0.0)
        .filter(|r| match bearing(r.start.position, r.true_post.position) {
            Ok(b) => angle_diff_deg(b, r.commanded_heading()) <= HEADING_MISMATCH_DEG,
            Err(_) => true,
        })
        .cloned()
        .collect();
    loop {
        let speeds: Vec<f64> = kept.iter().map(DiveRecord::ground_speed).collect();
        let n = speeds.len() as f64;
        if speeds.len() < 2 {
            break;
        }
        let mean = speeds.iter().sum::<f64>() / n;
        let sd = (speeds.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
        let before = kept.len();
        // slack for rounding in otherwise identical speeds
        let limit = SPEED_SIGMAS * sd + 1e-9 * mean.abs();
        let mut s = speeds.iter();
        kept.retain(|_| (s.next().unwrap() - mean).abs() <= limit);
        if kept.len() == before {
            break;
        }
    }
    Ok(kept)
}

const COLUMNS: [&str; 18] = [
    "start_lat",
    "start_lon",
    "start_time",
    "alpha",
    "beta",
    "n_yos",
    "z_bottom",
    "z_top",
    "theta_dive",
    "theta_climb",
    "chi",
    "instruction_set",
    "field",
    "bathy",
    "post_lat",
    "post_lon",
    "post_time",
    "termination",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    start_lat: f64,
    start_lon: f64,
    start_time: f64,
    alpha: f64,
    beta: f64,
    n_yos: u32,
    z_bottom: f64,
    z_top: f64,
    theta_dive: f64,
    theta_climb: f64,
    chi: f64,
    instruction_set: String,
    field: String,
    bathy: String,
    post_lat: f64,
    post_lon: f64,
    post_time: f64,
    termination: Termination,
}

impl From<&DiveRecord> for Row {
    fn from(r: &DiveRecord) -> Self {
        let c = &r.action.controls;
        Row {
            start_lat: r.start.position.lat,
            start_lon: r.start.position.lon,
            start_time: r.start.time,
            alpha: r.action.alpha,
            beta: r.beta,
            n_yos: c.n_yos,
            z_bottom: c.z_bottom,
            z_top: c.z_top,
            theta_dive: c.theta_dive,
            theta_climb: c.theta_climb,
            chi: c.chi,
            instruction_set: c.instruction_set.clone(),
            field: r.field.clone(),
            bathy: r.bathy.clone(),
            post_lat: r.true_post.position.lat,
            post_lon: r.true_post.position.lon,
            post_time: r.true_post.time,
            termination: r.termination,
        }
    }
}

impl From<Row> for DiveRecord {
    fn from(r: Row) -> Self {
        DiveRecord {
            start: SurfaceState::new(GeoPosition { lon: r.start_lon, lat: r.start_lat }, r.start_time),
            action: Action {
                alpha: r.alpha,
                controls: ControlParams {
                    n_yos: r.n_yos,
                    z_bottom: r.z_bottom,
                    z_top: r.z_top,
                    theta_dive: r.theta_dive,
                    theta_climb: r.theta_climb,
                    chi: r.chi,
                    instruction_set: r.instruction_set,
                },
            },
            beta: r.beta,
            field: r.field,
            bathy: r.bathy,
            true_post: SurfaceState::new(GeoPosition { lon: r.post_lon, lat: r.post_lat }, r.post_time),
            termination: r.termination,
        }
    }
}

/// First line of a dive file.
pub const DIVE_FILE_HEADER: &str =
    "# glidenav dive records v1; degrees, seconds, meters; termination = normal|abort|other";

/// Writes records as CSV preceded by the header comment line.
pub fn write_dive_records<W: Write>(mut w: W, records: &[DiveRecord]) -> Result<(), CalibError> {
    writeln!(w, "{DIVE_FILE_HEADER}")?;
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(Row::from(r)).map_err(|e| CalibError::MalformedRecord { line: 0, message: e.to_string() })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dive_records<R: BufRead>(mut r: R) -> Result<Vec<DiveRecord>, CalibError> {
    let mut first = String::new();
    r.read_line(&mut first)?;
    if !first.starts_with("# glidenav dive records v1") {
        return Err(CalibError::MalformedRecord { line: 1, message: "missing dive file header".into() });
    }
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(|e| CalibError::MalformedRecord { line: 2, message: e.to_string() })?;
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(CalibError::MalformedRecord {
            line: 2,
            message: format!("expected columns {}", COLUMNS.join(",")),
        });
    }
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize::<Row>().enumerate() {
        let line = k + 3;
        let rec = DiveRecord::from(row.map_err(|e| CalibError::MalformedRecord { line, message: e.to_string() })?);
        if !rec.start.position.is_valid() || !rec.true_post.position.is_valid() {
            return Err(CalibError::MalformedRecord { line, message: "position out of range".into() });
        }
        if rec.duration() <= 0.0 {
            return Err(CalibError::MalformedRecord { line, message: "post-dive time must follow the start".into() });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn save_dive_records(path: &Path, records: &[DiveRecord]) -> Result<(), CalibError> {
    let f = std::fs::File::create(path)?;
    write_dive_records(std::io::BufWriter::new(f), records)
}

pub fn load_dive_records(path: &Path) -> Result<Vec<DiveRecord>, CalibError> {
    let f = std::fs::File::open(path)?;
    read_dive_records(std::io::BufReader::new(f))
}

/// Settings for generating a synthetic dive corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDives {
    pub n: usize,
    pub controls: ControlParams,
    /// Relative bearings drawn uniformly per dive.
    pub action_set: Vec<f64>,
    /// Names recorded in the `field` and `bathy` columns.
    pub field: String,
    pub bathy: String,
    pub seed: u64,
}

/// Simulates `spec.n` dives with `sim` from random starts in the central
/// half of the forecast domain, random goal bearings and random actions.
/// Starts whose dive leaves the domain are redrawn.
pub fn synth_dive_records(sim: &DiveSimulator, spec: &SynthDives) -> Result<Vec<DiveRecord>, CalibError> {
    if spec.action_set.is_empty() {
        return Err(CalibError::InvalidConfig("action_set is empty".into()));
    }
    let mut rng = seed::rng(seed::derive(spec.seed, &[0]));
    let central = |a: &crate::envfield::Axis, frac: f64| {
        let (lo, hi) = (a.start(), a.end());
        (lo + 0.25 * (hi - lo), lo + (0.25 + 0.5 * frac) * (hi - lo))
    };
    let lon = central(sim.field.lon_axis(), 1.0);
    let lat = central(sim.field.lat_axis(), 1.0);
    let (t0, _) = central(sim.field.time_axis(), 0.0);
    let t = (sim.field.time_axis().start(), t0);
    let mut out = Vec::with_capacity(spec.n);
    let mut attempts = 0usize;
    while out.len() < spec.n {
        attempts += 1;
        if attempts > 20 * spec.n + 100 {
            return Err(CalibError::InvalidConfig("too many synthetic dives left the forecast domain".into()));
        }
        let start = SurfaceState::new(
            GeoPosition { lon: rng.random_range(lon.0..lon.1), lat: rng.random_range(lat.0..lat.1) },
            rng.random_range(t.0..t.1),
        );
        let alpha = spec.action_set[rng.random_range(0..spec.action_set.len())];
        let beta = rng.random_range(0.0..360.0);
        let action = Action { alpha, controls: spec.controls.clone() };
        let dive_seed = seed::derive(spec.seed, &[1, out.len() as u64, attempts as u64]);
        let Ok(post) = sim.simulate_dive(start, &action, beta, dive_seed) else {
            continue;
        };
        out.push(DiveRecord {
            start,
            action,
            beta,
            field: spec.field.clone(),
            bathy: spec.bathy.clone(),
            true_post: post,
            termination: Termination::Normal,
        });
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geo::point_on_heading;
    use proptest::prelude::*;

    pub fn record(heading_off: f64, dist: f64, dur: f64) -> DiveRecord {
        let start = SurfaceState::new(GeoPosition { lon: 0.3, lat: 57.3 }, 1_000.0);
        let beta = 60.0;
        let post = point_on_heading(start.position, beta + heading_off, dist);
        DiveRecord {
            start,
            action: Action { alpha: 0.0, controls: ControlParams::default() },
            beta,
            field: "f".into(),
            bathy: "b".into(),
            true_post: SurfaceState::new(post, start.time + dur),
            termination: Termination::Normal,
        }
    }

    #[test]
    fn identical_dives_survive() {
        let rs = vec![record(0.0, 2_000.0, 9_500.0); 5];
        assert_eq!(clean_dataset(&rs).unwrap(), rs);
    }

    #[test]
    fn abort_is_removed() {
        let mut rs = vec![record(0.0, 2_000.0, 9_500.0); 5];
        rs[2].termination = Termination::Abort;
        assert_eq!(clean_dataset(&rs).unwrap().len(), 4);
    }

    #[test]
    fn heading_threshold() {
        let mut rs = vec![record(0.0, 2_000.0, 9_500.0); 4];
        rs.push(record(120.0, 2_000.0, 9_500.0));
        rs.push(record(-60.0, 2_000.0, 9_500.0));
        let kept = clean_dataset(&rs).unwrap();
        assert_eq!(kept.len(), 5);
        assert!(kept
            .iter()
            .all(|r| angle_diff_deg(bearing(r.start.position, r.true_post.position).unwrap(), 60.0) < 61.0));
    }

    #[test]
    fn speed_outlier_removed() {
        let mut rs: Vec<_> = (0..20).map(|i| record(0.0, 2_000.0 + 10.0 * i as f64, 9_500.0)).collect();
        rs.push(record(0.0, 9_000.0, 9_500.0));
        let kept = clean_dataset(&rs).unwrap();
        assert!(kept.len() < rs.len());
        assert!(kept.iter().all(|r| r.ground_speed() < 0.5));
    }

    #[test]
    fn too_small() {
        assert!(matches!(clean_dataset(&[record(0.0, 1.0, 1.0)]), Err(CalibError::DatasetTooSmall(1, 3))));
    }

    #[test]
    fn file_round_trip() {
        let mut rs = vec![record(0.0, 2_000.0, 9_500.0), record(30.0, 1_500.0, 9_000.0)];
        rs[1].termination = Termination::Other;
        rs[1].field = "fields/a,b.ogf".into();
        let mut buf = Vec::new();
        write_dive_records(&mut buf, &rs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(DIVE_FILE_HEADER));
        assert!(text.lines().nth(1).unwrap().starts_with("start_lat,start_lon"));
        assert_eq!(read_dive_records(&buf[..]).unwrap(), rs);
    }

    #[test]
    fn bad_row_reports_line() {
        let mut buf = Vec::new();
        write_dive_records(&mut buf, &[record(0.0, 2_000.0, 9_500.0)]).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("1,2,3\n");
        let err = read_dive_records(text.as_bytes()).unwrap_err();
        assert!(matches!(err, CalibError::MalformedRecord { line: 4, .. }), "{err}");
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(dives in prop::collection::vec((-150.0f64..150.0, 100.0f64..6_000.0, 3_000.0f64..12_000.0, 0u8..10), 3..40)) {
            let rs: Vec<_> = dives
                .iter()
                .map(|(h, d, t, k)| {
                    let mut r = record(*h, *d, *t);
                    if *k == 0 {
                        r.termination = Termination::Abort;
                    }
                    r
                })
                .collect();
            let once = clean_dataset(&rs).unwrap();
            if once.len() >= 3 {
                prop_assert_eq!(clean_dataset(&once).unwrap(), once);
            }
        }
    }
}

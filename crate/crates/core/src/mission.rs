//! Goal lifecycle for one glider: cycling through ordered goals, deciding
//! when a goal counts as reached, the safety-polygon override and transect
//! bookkeeping.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divesim::{ControlParams, DiveSimulator};
use crate::geo::{geodesic_distance, GeoPosition, LocalFrame, SurfaceState};
use crate::navplan::{to_wpt_list, WaypointList, WaypointParams};
use crate::planner::{plan_next_dive, PlanError, PlannerConfig, ProblemInstance};

/// Plan entries within this distance of a goal are the goal itself.
const SAME_POINT_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MissionError {
    #[error("invalid mission configuration: {0}")]
    InvalidConfig(String),
}

fn default_progress_threshold() -> f64 {
    0.9
}

fn default_action_set() -> Vec<f64> {
    vec![-40.0, -20.0, 0.0, 20.0, 40.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionConfig {
    pub goals: Vec<GeoPosition>,
    pub rho: f64,
    pub rho_wpt: f64,
    pub n_bck: usize,
    #[serde(default = "default_action_set")]
    pub action_set: Vec<f64>,
    #[serde(default)]
    pub controls: ControlParams,
    /// Lon/lat ring; closing vertex optional.
    #[serde(default)]
    pub safety_polygon: Option<Vec<GeoPosition>>,
    #[serde(default = "default_progress_threshold")]
    pub progress_threshold: f64,
}

impl MissionConfig {
    pub fn waypoint_params(&self) -> WaypointParams {
        WaypointParams { rho: self.rho, rho_wpt: self.rho_wpt, n_bck: self.n_bck }
    }

    pub fn validate(&self) -> Result<(), MissionError> {
        let bad = |m: String| Err(MissionError::InvalidConfig(m));
        if self.goals.len() < 2 {
            return bad("at least two goals are required".into());
        }
        if let Some(g) = self.goals.iter().find(|g| !g.is_valid()) {
            return bad(format!("goal ({}, {}) is not a valid position", g.lon, g.lat));
        }
        for (i, a) in self.goals.iter().enumerate() {
            for (j, b) in self.goals.iter().enumerate().skip(i + 1) {
                if geodesic_distance(*a, *b) < SAME_POINT_M {
                    return bad(format!("goals {i} and {j} coincide"));
                }
            }
        }
        if !(self.rho > 0.0 && self.rho_wpt > self.rho) {
            return bad("need rho_wpt > rho > 0".into());
        }
        if !(self.progress_threshold > 0.0 && self.progress_threshold <= 1.0) {
            return bad("progress_threshold must lie in (0, 1]".into());
        }
        if !self.action_set.contains(&0.0) {
            return bad("action_set must contain 0".into());
        }
        self.controls.validate().map_err(|e| MissionError::InvalidConfig(e.to_string()))?;
        if let Some(ring) = &self.safety_polygon {
            let poly = Polygon::new(ring).map_err(MissionError::InvalidConfig)?;
            if let Some(i) = self.goals.iter().position(|g| !poly.contains(*g)) {
                return bad(format!("goal {i} lies outside the safety polygon"));
            }
        }
        Ok(())
    }

    fn polygon(&self) -> Option<Polygon> {
        self.safety_polygon.as_ref().and_then(|r| Polygon::new(r).ok())
    }
}

/// Closed ring evaluated on the tangent plane at its first vertex.
#[derive(Debug, Clone)]
pub struct Polygon {
    frame: LocalFrame,
    xy: Vec<[f64; 2]>,
}

impl Polygon {
    pub fn new(ring: &[GeoPosition]) -> Result<Self, String> {
        let mut pts = ring.to_vec();
        if pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        if pts.len() < 3 {
            return Err("safety polygon needs at least three vertices".into());
        }
        if pts.iter().any(|p| !p.is_valid()) {
            return Err("safety polygon has an invalid vertex".into());
        }
        let frame = LocalFrame::new(pts[0]);
        let xy: Vec<[f64; 2]> = pts.iter().map(|p| frame.project(*p)).collect();
        let n = xy.len();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if !adjacent && segments_cross(xy[i], xy[(i + 1) % n], xy[j], xy[(j + 1) % n]) {
                    return Err(format!("safety polygon edges {i} and {j} intersect"));
                }
            }
        }
        Ok(Polygon { frame, xy })
    }

    /// Even-odd rule.
    pub fn contains(&self, p: GeoPosition) -> bool {
        let [x, y] = self.frame.project(p);
        let mut inside = false;
        let n = self.xy.len();
        let mut j = n - 1;
        for i in 0..n {
            let [xi, yi] = self.xy[i];
            let [xj, yj] = self.xy[j];
            if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    /// Area centroid, or the vertex mean for a degenerate ring.
    pub fn centroid(&self) -> GeoPosition {
        let n = self.xy.len();
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let [x0, y0] = self.xy[i];
            let [x1, y1] = self.xy[(i + 1) % n];
            let cross = x0 * y1 - x1 * y0;
            a += cross;
            cx += (x0 + x1) * cross;
            cy += (y0 + y1) * cross;
        }
        if a.abs() < 1e-6 {
            let sx: f64 = self.xy.iter().map(|p| p[0]).sum();
            let sy: f64 = self.xy.iter().map(|p| p[1]).sum();
            return self.frame.unproject([sx / n as f64, sy / n as f64]);
        }
        self.frame.unproject([cx / (3.0 * a), cy / (3.0 * a)])
    }
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// A finished leg between consecutive goals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transect {
    pub goal_index: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub dives: u32,
    /// Sum of great-circle distances between logged surfacings (m).
    pub length_m: f64,
}

/// Leg currently in progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenTransect {
    pub start_time: f64,
    pub dives: u32,
    pub length_m: f64,
    pub last: SurfaceState,
}

impl OpenTransect {
    fn starting_at(s: SurfaceState) -> Self {
        OpenTransect { start_time: s.time, dives: 0, length_m: 0.0, last: s }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionState {
    pub active_goal_index: usize,
    pub previous_goal: GeoPosition,
    pub last_plan: WaypointList,
    pub last_reported_wpt_index: Option<usize>,
    pub transect_log: Vec<Transect>,
    pub current: OpenTransect,
}

impl MissionState {
    /// Starts heading for goal 0 from the deployment surfacing.
    pub fn new(deployment: SurfaceState) -> Self {
        MissionState {
            active_goal_index: 0,
            previous_goal: deployment.position,
            last_plan: WaypointList(Vec::new()),
            last_reported_wpt_index: None,
            transect_log: Vec::new(),
            current: OpenTransect::starting_at(deployment),
        }
    }

    pub fn active_goal(&self, cfg: &MissionConfig) -> GeoPosition {
        cfg.goals[self.active_goal_index]
    }

    pub fn next_goal(&self, cfg: &MissionConfig) -> GeoPosition {
        cfg.goals[(self.active_goal_index + 1) % cfg.goals.len()]
    }

    /// Adds a surfacing to the open transect. Repeats of the last surfacing
    /// (same time) are ignored.
    pub fn record_surfacing(&mut self, s: SurfaceState) {
        let cur = &mut self.current;
        if s.time <= cur.last.time {
            return;
        }
        cur.length_m += geodesic_distance(cur.last.position, s.position);
        cur.dives += 1;
        cur.last = s;
    }
}

/// Fraction of the previous-goal to active-goal chord covered by `p`,
/// clamped to [0, 1].
pub fn along_track_progress(from: GeoPosition, to: GeoPosition, p: GeoPosition) -> f64 {
    let frame = LocalFrame::new(from);
    let [bx, by] = frame.project(to);
    let [px, py] = frame.project(p);
    let len2 = bx * bx + by * by;
    if len2 == 0.0 {
        return 1.0;
    }
    ((px * bx + py * by) / len2).clamp(0.0, 1.0)
}

/// True when the active goal counts as achieved: the glider surfaced within
/// `rho` of it, reported following a waypoint past the goal's entry in the
/// last plan, or surfaced outside the safety polygon after covering most of
/// the transect.
pub fn check_goal_achieved(
    state: &MissionState,
    surfacing: SurfaceState,
    reported_wpt_index: Option<usize>,
    cfg: &MissionConfig,
) -> bool {
    let goal = state.active_goal(cfg);
    if geodesic_distance(surfacing.position, goal) <= cfg.rho {
        return true;
    }
    if let Some(idx) = reported_wpt_index {
        let passed = state.last_plan.0.iter().take(idx);
        if passed.into_iter().any(|w| geodesic_distance(*w, goal) <= SAME_POINT_M) {
            return true;
        }
    }
    if let Some(poly) = cfg.polygon() {
        if !poly.contains(surfacing.position)
            && along_track_progress(state.previous_goal, goal, surfacing.position) >= cfg.progress_threshold
        {
            return true;
        }
    }
    false
}

/// Moves to the next goal, cycling, and closes the open transect.
pub fn advance_goal(state: &MissionState, cfg: &MissionConfig) -> MissionState {
    let mut next = state.clone();
    next.transect_log.push(Transect {
        goal_index: state.active_goal_index,
        start_time: state.current.start_time,
        end_time: state.current.last.time,
        dives: state.current.dives,
        length_m: state.current.length_m,
    });
    next.previous_goal = state.active_goal(cfg);
    next.active_goal_index = (state.active_goal_index + 1) % cfg.goals.len();
    next.current = OpenTransect::starting_at(state.current.last);
    next
}

/// Where a waypoint list came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PlanSource {
    Planner {
        alpha: f64,
    },
    /// Planner failed; straight to goal.
    Fallback,
    /// Outside the safety polygon; head for its centroid.
    SafetyOverride,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub waypoints: WaypointList,
    pub controls: ControlParams,
    pub source: PlanSource,
    pub goal_advanced: bool,
    pub active_goal_index: usize,
}

/// Handles one surfacing: logs it, advances the goal when achieved, then
/// builds the next waypoint list. Never fails; planner errors fall back to
/// straight-to-goal.
pub fn next_instruction(
    state: &mut MissionState,
    surfacing: SurfaceState,
    reported_wpt_index: Option<usize>,
    cfg: &MissionConfig,
    planner_cfg: &PlannerConfig,
    sim: &DiveSimulator,
    seed: u64,
) -> (Instruction, Option<PlanError>) {
    state.record_surfacing(surfacing);
    state.last_reported_wpt_index = reported_wpt_index;
    let achieved = check_goal_achieved(state, surfacing, reported_wpt_index, cfg);
    if achieved {
        *state = advance_goal(state, cfg);
    }

    let mut err = None;
    let (waypoints, source) = match cfg.polygon().filter(|p| !p.contains(surfacing.position)) {
        Some(poly) => (WaypointList(vec![poly.centroid()]), PlanSource::SafetyOverride),
        None => {
            let goal = state.active_goal(cfg);
            let next = state.next_goal(cfg);
            let mut pc = planner_cfg.clone();
            pc.action_set = cfg.action_set.clone();
            pc.controls = cfg.controls.clone();
            let instance = ProblemInstance { start: surfacing, goal, rho: cfg.rho };
            let (alpha, source) = match plan_next_dive(&instance, sim, &pc, seed) {
                Ok(a) => (a.alpha, PlanSource::Planner { alpha: a.alpha }),
                Err(e) => {
                    err = Some(e);
                    (0.0, PlanSource::Fallback)
                }
            };
            (to_wpt_list(alpha, surfacing.position, goal, next, cfg.waypoint_params()), source)
        }
    };
    state.last_plan = waypoints.clone();
    let instr = Instruction {
        waypoints,
        controls: cfg.controls.clone(),
        source,
        goal_advanced: achieved,
        active_goal_index: state.active_goal_index,
    };
    (instr, err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divesim::{FlightTable, SimParams};
    use crate::envfield::{synth_bathy, synth_field, BathyKind, FieldKind, GridSpec};
    use crate::geo::point_on_heading;
    use proptest::prelude::*;

    fn base() -> GeoPosition {
        GeoPosition { lon: 0.5, lat: 57.5 }
    }

    fn config(poly: bool) -> MissionConfig {
        let a = base();
        let b = point_on_heading(a, 90.0, 20_000.0);
        let safety_polygon = poly.then(|| {
            let f = LocalFrame::new(a);
            vec![
                f.unproject([-5_000.0, -3_000.0]),
                f.unproject([25_000.0, -3_000.0]),
                f.unproject([25_000.0, 3_000.0]),
                f.unproject([-5_000.0, 3_000.0]),
            ]
        });
        MissionConfig {
            goals: vec![a, b],
            rho: 1_000.0,
            rho_wpt: 7_000.0,
            n_bck: 2,
            action_set: default_action_set(),
            controls: ControlParams::default(),
            safety_polygon,
            progress_threshold: 0.9,
        }
    }

    fn heading_to_b() -> MissionState {
        let cfg = config(false);
        let mut s = MissionState::new(SurfaceState::new(cfg.goals[0], 0.0));
        s.active_goal_index = 1;
        s.previous_goal = cfg.goals[0];
        s
    }

    #[test]
    fn within_radius_is_achieved() {
        let cfg = config(false);
        let st = heading_to_b();
        let p = point_on_heading(cfg.goals[1], 200.0, 800.0);
        assert!(check_goal_achieved(&st, SurfaceState::new(p, 10.0), None, &cfg));
        let far = point_on_heading(cfg.goals[1], 200.0, 1_200.0);
        assert!(!check_goal_achieved(&st, SurfaceState::new(far, 10.0), None, &cfg));
    }

    #[test]
    fn reported_index_past_goal_is_achieved() {
        let cfg = config(false);
        let mut st = heading_to_b();
        let g = cfg.goals[1];
        st.last_plan = WaypointList(vec![g, point_on_heading(g, 0.0, 7_000.0), point_on_heading(g, 0.0, 14_000.0)]);
        let away = SurfaceState::new(point_on_heading(g, 0.0, 3_000.0), 10.0);
        assert!(check_goal_achieved(&st, away, Some(1), &cfg));
        assert!(!check_goal_achieved(&st, away, Some(0), &cfg));
        assert!(!check_goal_achieved(&st, away, None, &cfg));
    }

    #[test]
    fn polygon_progress_rule() {
        let cfg = config(true);
        let st = heading_to_b();
        let f = LocalFrame::new(cfg.goals[0]);
        // goal b sits 20 km east, polygon half-width 3 km
        let at = |x: f64| SurfaceState::new(f.unproject([x, 4_000.0]), 10.0);
        let oracle = |x: f64| x / 20_000.0;
        assert!(oracle(18_600.0) >= 0.9 && oracle(17_000.0) < 0.9);
        assert!(check_goal_achieved(&st, at(18_600.0), None, &cfg));
        assert!(!check_goal_achieved(&st, at(17_000.0), None, &cfg));
        // same progress but inside the polygon
        let inside = SurfaceState::new(f.unproject([18_600.0, 1_500.0]), 10.0);
        assert!(!check_goal_achieved(&st, inside, None, &cfg));
        // without a polygon the rule never fires
        assert!(!check_goal_achieved(&st, at(18_600.0), None, &config(false)));
    }

    #[test]
    fn along_track_matches_projection() {
        let a = base();
        let b = point_on_heading(a, 90.0, 20_000.0);
        let f = LocalFrame::new(a);
        let p = f.unproject([18_600.0, 4_000.0]);
        assert!((along_track_progress(a, b, p) - 0.93).abs() < 1e-3);
        assert_eq!(along_track_progress(a, b, f.unproject([-500.0, 0.0])), 0.0);
        assert_eq!(along_track_progress(a, b, f.unproject([30_000.0, 0.0])), 1.0);
    }

    #[test]
    fn goals_cycle_and_log_grows() {
        let cfg = config(false);
        let st0 = MissionState::new(SurfaceState::new(cfg.goals[0], 0.0));
        let st1 = advance_goal(&st0, &cfg);
        assert_eq!(st1.active_goal_index, 1);
        assert_eq!(st1.transect_log.len(), 1);
        let st2 = advance_goal(&st1, &cfg);
        assert_eq!(st2.active_goal_index, 0);
        assert_eq!(st2.transect_log.len(), 2);
        assert_eq!(st2.previous_goal, cfg.goals[1]);
    }

    #[test]
    fn polygon_validation() {
        let mut cfg = config(true);
        cfg.validate().unwrap();
        // bow tie
        let f = LocalFrame::new(base());
        cfg.safety_polygon = Some(vec![
            f.unproject([0.0, 0.0]),
            f.unproject([10.0, 10.0]),
            f.unproject([10.0, 0.0]),
            f.unproject([0.0, 10.0]),
        ]);
        assert!(cfg.validate().is_err());
        let mut cfg = config(true);
        cfg.goals.push(point_on_heading(base(), 0.0, 10_000.0));
        assert!(cfg.validate().is_err());
        let mut cfg = config(false);
        cfg.goals[1] = cfg.goals[0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn centroid_of_rectangle() {
        let cfg = config(true);
        let poly = cfg.polygon().unwrap();
        let f = LocalFrame::new(base());
        let c = f.project(poly.centroid());
        assert!((c[0] - 10_000.0).abs() < 5.0 && c[1].abs() < 5.0, "{c:?}");
    }

    fn world() -> (crate::envfield::CurrentField, crate::envfield::Bathymetry) {
        let spec =
            GridSpec::regular((0.0, 1.5), 30, (57.0, 58.0), 20, vec![0.0, 100.0, 200.0], (0.0, 86_400.0 * 5.0), 120)
                .unwrap();
        let field = synth_field(&FieldKind::Uniform { u: 0.0, v: 0.0 }, &spec).unwrap();
        let bathy = synth_bathy(&BathyKind::Flat { depth: 150.0 }, &spec.lon_edges, &spec.lat_edges).unwrap();
        (field, bathy)
    }

    fn quick_planner() -> PlannerConfig {
        PlannerConfig { n_trials: 20, n_threads: 1, max_depth: 3, ..PlannerConfig::default() }
    }

    #[test]
    fn outside_polygon_gets_centroid() {
        let (field, bathy) = world();
        let flight = FlightTable::default();
        let sim = DiveSimulator::new(&field, &bathy, SimParams::deterministic(), &flight);
        let cfg = config(true);
        let mut st = heading_to_b();
        let f = LocalFrame::new(base());
        let s = SurfaceState::new(f.unproject([5_000.0, 6_000.0]), 100.0);
        let (ins, err) = next_instruction(&mut st, s, None, &cfg, &quick_planner(), &sim, 1);
        assert!(err.is_none());
        assert_eq!(ins.source, PlanSource::SafetyOverride);
        assert_eq!(ins.waypoints.0, vec![cfg.polygon().unwrap().centroid()]);
        assert_eq!(ins.controls, cfg.controls);
    }

    #[test]
    fn achieved_goal_advances_before_planning() {
        let (field, bathy) = world();
        let flight = FlightTable::default();
        let sim = DiveSimulator::new(&field, &bathy, SimParams::deterministic(), &flight);
        let cfg = config(false);
        let mut st = heading_to_b();
        let s = SurfaceState::new(point_on_heading(cfg.goals[1], 270.0, 500.0), 100.0);
        let (ins, _) = next_instruction(&mut st, s, None, &cfg, &quick_planner(), &sim, 1);
        assert!(ins.goal_advanced);
        assert_eq!(ins.active_goal_index, 0);
        // plan now heads back west toward goal 0
        let w0 = ins.waypoints.first().unwrap();
        assert!(crate::geo::bearing(s.position, w0).unwrap() > 180.0);
    }

    #[test]
    fn planner_failure_falls_back_to_stg() {
        let (field, bathy) = world();
        let flight = FlightTable::default();
        let sim = DiveSimulator::new(&field, &bathy, SimParams::deterministic(), &flight);
        let mut cfg = config(false);
        // goal outside the forecast: every dive from the edge leaves the grid
        let edge = GeoPosition { lon: 1.499, lat: 57.5 };
        cfg.goals = vec![GeoPosition { lon: 1.7, lat: 57.5 }, base()];
        let mut st = MissionState::new(SurfaceState::new(edge, 0.0));
        let (ins, err) =
            next_instruction(&mut st, SurfaceState::new(edge, 10.0), None, &cfg, &quick_planner(), &sim, 3);
        assert_eq!(err, Some(PlanError::NoFeasibleAction));
        assert_eq!(ins.source, PlanSource::Fallback);
        let expect = to_wpt_list(0.0, edge, cfg.goals[0], cfg.goals[1], cfg.waypoint_params());
        assert_eq!(ins.waypoints, expect);
    }

    proptest! {
        #[test]
        fn radius_condition_is_monotone(d in 0.0f64..1_000.0, b in 0.0f64..360.0, idx in proptest::option::of(0usize..4)) {
            let cfg = config(true);
            let mut st = heading_to_b();
            st.last_plan = WaypointList(vec![point_on_heading(base(), 90.0, 7_000.0)]);
            let p = point_on_heading(cfg.goals[1], b, d);
            prop_assert!(check_goal_achieved(&st, SurfaceState::new(p, 1.0), idx, &cfg));
        }

        #[test]
        fn transect_length_is_segment_sum(steps in prop::collection::vec((0.0f64..360.0, 0.0f64..5_000.0), 1..12)) {
            let cfg = config(false);
            let start = SurfaceState::new(base(), 0.0);
            let mut st = MissionState::new(start);
            let mut p = start.position;
            let mut oracle = 0.0;
            for (k, (b, d)) in steps.iter().enumerate() {
                let q = point_on_heading(p, *b, *d);
                oracle += geodesic_distance(p, q);
                st.record_surfacing(SurfaceState::new(q, (k + 1) as f64 * 1_000.0));
                p = q;
            }
            let done = advance_goal(&st, &cfg);
            let t = &done.transect_log[0];
            prop_assert_eq!(t.dives as usize, steps.len());
            prop_assert!((t.length_m - oracle).abs() <= 1e-6 * oracle.max(1.0));
        }

        #[test]
        fn advancing_n_goals_returns_home(n in 2usize..6, start in 0usize..6) {
            let mut cfg = config(false);
            cfg.goals = (0..n).map(|i| point_on_heading(base(), 360.0 * i as f64 / n as f64, 10_000.0)).collect();
            let mut st = MissionState::new(SurfaceState::new(base(), 0.0));
            st.active_goal_index = start % n;
            let first = st.active_goal_index;
            for _ in 0..n {
                st = advance_goal(&st, &cfg);
            }
            prop_assert_eq!(st.active_goal_index, first);
            prop_assert_eq!(st.transect_log.len(), n);
        }
    }
}

//! Planner behavior on small deterministic transects, checked against an
//! exhaustive evaluation of the fixed-bearing policies.

use glidenav::divesim::{Action, ControlParams, DiveSimulator, FlightTable, NoiseState, SimParams};
use glidenav::envfield::{synth_bathy, synth_field, BathyKind, Bathymetry, CurrentField, FieldKind, GridSpec};
use glidenav::geo::{bearing, point_on_heading, GeoPosition, SurfaceState};
use glidenav::planner::{plan_next_dive, stg_policy, PlannerConfig, ProblemInstance};
use glidenav::seed;

const ACTIONS: [f64; 5] = [-40.0, -20.0, 0.0, 20.0, 40.0];

fn env(u: f64, v: f64) -> (CurrentField, Bathymetry) {
    let spec =
        GridSpec::regular((-6.3, -5.3), 20, (55.9, 56.9), 20, vec![0.0, 100.0, 300.0], (0.0, 864_000.0), 10).unwrap();
    let field = synth_field(&FieldKind::Uniform { u, v }, &spec).unwrap();
    let bathy = synth_bathy(&BathyKind::Flat { depth: 300.0 }, &spec.lon_edges, &spec.lat_edges).unwrap();
    (field, bathy)
}

fn instance(dist: f64, rho: f64) -> ProblemInstance {
    let start = GeoPosition { lon: -5.9, lat: 56.2 };
    ProblemInstance { start: SurfaceState::new(start, 0.0), goal: point_on_heading(start, 90.0, dist), rho }
}

/// Time to reach the goal flying bearing `alpha` on every dive, in a
/// noise-free world; `None` if it never gets there within 40 dives.
fn fixed_policy_duration(sim: &DiveSimulator, inst: &ProblemInstance, alpha: f64, c: &ControlParams) -> Option<f64> {
    let mut s = inst.start;
    let mut noise = NoiseState::quiet(3);
    let mut rng = seed::rng(0);
    for _ in 0..40 {
        if inst.in_goal(s.position) {
            return Some(s.time - inst.start.time);
        }
        let beta = bearing(s.position, inst.goal).ok()?;
        s = sim.simulate_dive_with(s, &Action { alpha, controls: c.clone() }, beta, &mut noise, &mut rng).ok()?;
    }
    None
}

fn best_fixed_alpha(sim: &DiveSimulator, inst: &ProblemInstance, c: &ControlParams) -> f64 {
    let mut scored: Vec<(f64, f64)> =
        ACTIONS.iter().filter_map(|&a| fixed_policy_duration(sim, inst, a, c).map(|d| (a, d))).collect();
    scored.sort_by(|x, y| x.1.total_cmp(&y.1));
    scored[0].0
}

#[test]
fn zero_current_goal_one_km_east_prefers_straight_to_goal() {
    let (field, bathy) = env(0.0, 0.0);
    let flight = FlightTable::default();
    let sim = DiveSimulator::new(&field, &bathy, SimParams::deterministic(), &flight);
    let controls = ControlParams { n_yos: 2, ..ControlParams::default() };
    let inst = instance(1_000.0, 300.0);
    assert_eq!(best_fixed_alpha(&sim, &inst, &controls), 0.0);

    let cfg = PlannerConfig { controls: controls.clone(), ..PlannerConfig::default() };
    let hits = (0..100).filter(|&k| plan_next_dive(&inst, &sim, &cfg, k).unwrap().alpha == 0.0).count();
    assert!(hits >= 95, "alpha = 0 in {hits}/100 runs");
    assert_eq!(stg_policy(&inst, &cfg).alpha, 0.0);
}

#[test]
fn northward_crosscurrent_is_compensated() {
    let (field, bathy) = env(0.0, 0.2);
    let flight = FlightTable::default();
    let sim = DiveSimulator::new(&field, &bathy, SimParams::deterministic(), &flight);
    let controls = ControlParams { n_yos: 3, ..ControlParams::default() };
    let inst = instance(10_000.0, 1_000.0);
    // heading = beta - alpha, so pointing south of the goal is a negative alpha
    let best = best_fixed_alpha(&sim, &inst, &controls);
    assert!(best < 0.0, "best fixed bearing {best}");

    let cfg = PlannerConfig { controls, ..PlannerConfig::default() };
    let hits = (0..100).filter(|&k| plan_next_dive(&inst, &sim, &cfg, k).unwrap().alpha < 0.0).count();
    assert!(hits >= 90, "compensating bearing in {hits}/100 runs");
}

//! Seeded episode replay of the planner against straight-to-goal, scenario
//! selection and summary statistics.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divesim::{Action, CurrentBias, DiveSimulator};
use crate::geo::{bearing, geodesic_distance, GeoPosition, SurfaceState};
use crate::planner::{plan_next_dive, PlannerConfig, ProblemInstance};
use crate::seed;

const WORLD_STREAM: u64 = 0x0077_6f72_6c64;
const PLANNER_STREAM: u64 = 0x706c_616e;

pub const DEFAULT_DIVE_CAP: u32 = 40;
pub const DEFAULT_SELECTION_REPS: usize = 200;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("need at least {needed} candidate scenarios, got {got}")]
    InsufficientCandidates { needed: usize, got: usize },
    #[error("scenario {0:?} starts at its goal")]
    DegenerateScenario(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Favourable, Neutral, Unfavourable or any custom name.
    pub label: String,
    pub start: SurfaceState,
    pub goal: GeoPosition,
    /// Goal radius (m).
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Planner,
    Stg,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Planner => "planner",
            Policy::Stg => "stg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub label: String,
    pub policy: Policy,
    pub seed: u64,
    /// Seconds from the start to the last surfacing.
    pub duration: f64,
    pub dives: u32,
    /// Sum of surfacing-to-surfacing great-circle distances (m).
    pub path_length: f64,
    pub reached: bool,
    /// Why an unreached episode stopped.
    pub reason: Option<String>,
    pub surfacings: Vec<SurfaceState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub planner: PlannerConfig,
    pub dive_cap: u32,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig { planner: PlannerConfig::default(), dive_cap: DEFAULT_DIVE_CAP }
    }
}

/// Forecast bias the world applies throughout episode `seed`.
pub fn world_bias(world: &DiveSimulator, seed: u64) -> CurrentBias {
    world.new_noise(&mut seed::rng(seed::derive(seed, &[WORLD_STREAM]))).bias
}

/// Runs one episode. The world draws its noise from a stream that depends
/// only on `seed` and the dive number, so both policies see the same ocean
/// for the same seed. The planner samples from `model` with its own streams.
pub fn run_episode(
    scenario: &Scenario,
    policy: Policy,
    world: &DiveSimulator,
    model: &DiveSimulator,
    cfg: &EpisodeConfig,
    seed: u64,
) -> EpisodeResult {
    let mut noise = world.new_noise(&mut seed::rng(seed::derive(seed, &[WORLD_STREAM])));
    let mut s = scenario.start;
    let mut out = EpisodeResult {
        label: scenario.label.clone(),
        policy,
        seed,
        duration: 0.0,
        dives: 0,
        path_length: 0.0,
        reached: false,
        reason: None,
        surfacings: vec![s],
    };
    let instance = |s: SurfaceState| ProblemInstance { start: s, goal: scenario.goal, rho: scenario.rho };
    loop {
        if instance(s).in_goal(s.position) {
            out.reached = true;
            break;
        }
        if out.dives >= cfg.dive_cap {
            out.reason = Some(format!("dive cap of {} reached", cfg.dive_cap));
            break;
        }
        let beta = bearing(s.position, scenario.goal).expect("outside the goal radius");
        let alpha = match policy {
            Policy::Stg => 0.0,
            Policy::Planner => {
                let ps = seed::derive(seed, &[PLANNER_STREAM, out.dives as u64]);
                plan_next_dive(&instance(s), model, &cfg.planner, ps).map_or(0.0, |a| a.alpha)
            }
        };
        let action = Action { alpha, controls: cfg.planner.controls.clone() };
        let mut rng = seed::rng(seed::derive(seed, &[WORLD_STREAM, out.dives as u64]));
        match world.simulate_dive_with(s, &action, beta, &mut noise, &mut rng) {
            Ok(next) => {
                out.path_length += geodesic_distance(s.position, next.position);
                out.dives += 1;
                s = next;
                out.surfacings.push(s);
            }
            Err(e) => {
                out.reason = Some(e.to_string());
                break;
            }
        }
    }
    out.duration = s.time - scenario.start.time;
    out
}

/// Episodes for `policy` over `n` seeds derived from `base_seed`. Seed `k` is
/// the same for every policy, which pairs the episodes.
pub fn run_batch(
    scenario: &Scenario,
    policy: Policy,
    world: &DiveSimulator,
    model: &DiveSimulator,
    cfg: &EpisodeConfig,
    base_seed: u64,
    n: usize,
) -> Vec<EpisodeResult> {
    (0..n).map(|k| run_episode(scenario, policy, world, model, cfg, episode_seed(base_seed, k))).collect()
}

pub fn episode_seed(base_seed: u64, k: usize) -> u64 {
    seed::derive(base_seed, &[k as u64])
}

/// Mean straight-to-goal dive count of each candidate over `reps` seeds,
/// with unreached episodes counted at the dive cap.
pub fn mean_stg_dives(
    candidates: &[Scenario],
    world: &DiveSimulator,
    cfg: &EpisodeConfig,
    reps: usize,
    seed: u64,
) -> Vec<f64> {
    candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let base = seed::derive(seed, &[i as u64]);
            let total: u32 = run_batch(c, Policy::Stg, world, world, cfg, base, reps)
                .iter()
                .map(|r| if r.reached { r.dives } else { cfg.dive_cap })
                .sum();
            total as f64 / reps as f64
        })
        .collect()
}

/// Picks the candidates needing the fewest, median and most straight-to-goal
/// dives on average, labelled Favourable, Neutral and Unfavourable. Ties go
/// to the lower index.
pub fn select_scenarios(
    candidates: &[Scenario],
    world: &DiveSimulator,
    cfg: &EpisodeConfig,
    reps: usize,
    seed: u64,
) -> Result<[Scenario; 3], HarnessError> {
    if candidates.len() < 3 {
        return Err(HarnessError::InsufficientCandidates { needed: 3, got: candidates.len() });
    }
    if reps == 0 {
        return Err(HarnessError::Config("reps must be at least 1".into()));
    }
    if let Some(c) = candidates.iter().find(|c| geodesic_distance(c.start.position, c.goal) <= c.rho) {
        return Err(HarnessError::DegenerateScenario(c.label.clone()));
    }
    let means = mean_stg_dives(candidates, world, cfg, reps, seed);
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
    let pick = |i: usize, label: &str| Scenario { label: label.to_string(), ..candidates[i].clone() };
    let max = (1..means.len()).fold(0, |best, i| if means[i] > means[best] { i } else { best });
    Ok([pick(order[0], "Favourable"), pick(order[(order.len() - 1) / 2], "Neutral"), pick(max, "Unfavourable")])
}

/// Mean with a normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    /// NaN with fewer than two values.
    pub ci: f64,
}

impl MeanCi {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return MeanCi { mean, ci: f64::NAN };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        MeanCi { mean, ci: 1.96 * var.sqrt() / n.sqrt() }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.ci
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub policy: Policy,
    pub episodes: usize,
    pub reached: usize,
    pub duration_h: MeanCi,
    pub dives: MeanCi,
    pub length_km: MeanCi,
}

/// One row per (label, policy), in order of first appearance.
pub fn summarize(results: &[EpisodeResult]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, Policy)> = Vec::new();
    for r in results {
        let k = (r.label.clone(), r.policy);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(label, policy)| {
            let cell: Vec<&EpisodeResult> = results.iter().filter(|r| r.label == label && r.policy == policy).collect();
            let col = |f: &dyn Fn(&EpisodeResult) -> f64| MeanCi::of(&cell.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                episodes: cell.len(),
                reached: cell.iter().filter(|r| r.reached).count(),
                duration_h: col(&|r| r.duration / 3_600.0),
                dives: col(&|r| r.dives as f64),
                length_km: col(&|r| r.path_length / 1_000.0),
                label,
                policy,
            }
        })
        .collect()
}

fn fmt_ci(m: MeanCi, prec: usize) -> String {
    if m.ci.is_nan() {
        format!("{:.prec$} ± n/a", m.mean)
    } else {
        format!("{:.prec$} ± {:.prec$}", m.mean, m.ci)
    }
}

/// Plain-text table: Mean Duration, Mean Number Dives, Mean Transect Length.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:<8} {:>8} {:>20} {:>18} {:>22}",
        "scenario", "policy", "reached", "mean duration (h)", "mean dives", "mean length (km)"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<14} {:<8} {:>8} {:>20} {:>18} {:>22}",
            r.label,
            r.policy.name(),
            format!("{}/{}", r.reached, r.episodes),
            fmt_ci(r.duration_h, 2),
            fmt_ci(r.dives, 2),
            fmt_ci(r.length_km, 2)
        );
    }
    s
}

/// One CSV record per episode after a comment line describing the run.
pub fn write_results<W: Write>(mut w: W, note: &str, results: &[EpisodeResult]) -> Result<(), HarnessError> {
    writeln!(w, "# {note}")?;
    writeln!(w, "scenario,policy,seed,duration_s,dives,path_m,reached")?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.label,
            r.policy.name(),
            r.seed,
            r.duration,
            r.dives,
            r.path_length,
            r.reached
        )?;
    }
    Ok(())
}

pub fn save_results(path: &Path, note: &str, results: &[EpisodeResult]) -> Result<(), HarnessError> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_results(&mut w, note, results)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divesim::{FlightTable, SimParams};
    use crate::envfield::{synth_bathy, synth_field, BathyKind, Bathymetry, CurrentField, FieldKind, GridSpec};
    use crate::geo::point_on_heading;
    use proptest::prelude::*;

    fn world(u: f64, v: f64) -> (CurrentField, Bathymetry) {
        let spec =
            GridSpec::regular((0.0, 1.0), 10, (57.0, 58.0), 10, vec![0.0, 50.0, 200.0], (0.0, 20.0 * 86_400.0), 40)
                .unwrap();
        let field = synth_field(&FieldKind::Uniform { u, v }, &spec).unwrap();
        let bathy = synth_bathy(&BathyKind::Flat { depth: 300.0 }, &spec.lon_edges, &spec.lat_edges).unwrap();
        (field, bathy)
    }

    fn scenario(dist: f64) -> Scenario {
        let start = SurfaceState::new(GeoPosition { lon: 0.3, lat: 57.5 }, 0.0);
        Scenario { label: "t".into(), start, goal: point_on_heading(start.position, 90.0, dist), rho: 200.0 }
    }

    fn noisy() -> SimParams {
        SimParams { curr_mag: 0.03, curr_dir: 10.0, motion_mag: 0.02, motion_dir: 5.0, ..SimParams::deterministic() }
    }

    #[test]
    fn stg_zero_current_matches_closed_form() {
        let (f, b) = world(0.0, 0.0);
        let flight = FlightTable::default();
        let sim = DiveSimulator::new(&f, &b, SimParams::deterministic(), &flight);
        let cfg = EpisodeConfig::default();
        // one default dive: 9500 s, 2850 m through the water
        let r = run_episode(&scenario(3.0 * 2_850.0 + 100.0), Policy::Stg, &sim, &sim, &cfg, 1);
        assert!(r.reached);
        let n = 3;
        assert_eq!(r.dives, n);
        assert!((r.duration - n as f64 * 9_500.0).abs() < 1e-6 * r.duration);
        assert!((r.path_length - n as f64 * 2_850.0).abs() < 1.0);
    }

    #[test]
    fn same_seed_same_result() {
        let (f, b) = world(0.05, 0.1);
        let flight = FlightTable::default();
        let sim = DiveSimulator::new(&f, &b, noisy(), &flight);
        let cfg = EpisodeConfig {
            planner: PlannerConfig { n_trials: 30, n_threads: 2, max_depth: 3, ..PlannerConfig::default() },
            ..EpisodeConfig::default()
        };
        let a = run_episode(&scenario(8_000.0), Policy::Planner, &sim, &sim, &cfg, 9);
        let b2 = run_episode(&scenario(8_000.0), Policy::Planner, &sim, &sim, &cfg, 9);
        assert_eq!(a, b2);
    }

    #[test]
    fn dive_cap_and_domain_exit() {
        let (f, b) = world(0.0, 0.0);
        let flight = FlightTable::default();
        let sim = DiveSimulator::new(&f, &b, SimParams::deterministic(), &flight);
        let cfg = EpisodeConfig { dive_cap: 2, ..EpisodeConfig::default() };
        let r = run_episode(&scenario(30_000.0), Policy::Stg, &sim, &sim, &cfg, 1);
        assert!(!r.reached && r.dives == 2);
        let mut far = scenario(30_000.0);
        far.goal = GeoPosition { lon: 3.0, lat: 57.5 };
        let r = run_episode(&far, Policy::Stg, &sim, &sim, &EpisodeConfig::default(), 1);
        assert!(!r.reached && r.reason.unwrap().contains("domain"));
    }

    #[test]
    fn summary_of_small_sample() {
        let mk = |h: f64| EpisodeResult {
            label: "x".into(),
            policy: Policy::Stg,
            seed: 0,
            duration: h * 3_600.0,
            dives: 3,
            path_length: 5_000.0,
            reached: true,
            reason: None,
            surfacings: vec![],
        };
        let rows = summarize(&[mk(10.0), mk(12.0), mk(14.0)]);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].duration_h.mean - 12.0).abs() < 1e-12);
        assert!((rows[0].duration_h.ci - 2.26).abs() < 0.005);
        assert_eq!(rows[0].dives.ci, 0.0);
        assert_eq!(rows[0].length_km.mean, 5.0);
        let text = format_summary(&rows);
        assert!(text.contains("mean duration (h)") && text.contains("12.00 ± 2.26"));
    }

    #[test]
    fn scenario_labels_follow_dive_counts() {
        let (f, b) = world(0.0, 0.0);
        let flight = FlightTable::default();
        let sim = DiveSimulator::new(&f, &b, SimParams::deterministic(), &flight);
        // 2850 m per dive: 9, 5 and 7 dives
        let cands: Vec<_> = [9.0, 5.0, 7.0].iter().map(|k| scenario(k * 2_850.0 + 100.0)).collect();
        let picked = select_scenarios(&cands, &sim, &EpisodeConfig::default(), 3, 0).unwrap();
        assert_eq!(picked[0].goal, cands[1].goal);
        assert_eq!(picked[1].goal, cands[2].goal);
        assert_eq!(picked[2].goal, cands[0].goal);
        assert_eq!(
            picked.iter().map(|s| s.label.as_str()).collect::<Vec<_>>(),
            ["Favourable", "Neutral", "Unfavourable"]
        );
        let same = vec![scenario(5.0 * 2_850.0 + 100.0); 3];
        let p = select_scenarios(&same, &sim, &EpisodeConfig::default(), 2, 0).unwrap();
        assert_eq!(p.iter().map(|s| s.label.as_str()).collect::<Vec<_>>(), ["Favourable", "Neutral", "Unfavourable"]);
        assert!(select_scenarios(&cands[..2], &sim, &EpisodeConfig::default(), 2, 0).is_err());
    }

    #[test]
    fn results_file_layout() {
        let (f, b) = world(0.0, 0.0);
        let flight = FlightTable::default();
        let sim = DiveSimulator::new(&f, &b, SimParams::deterministic(), &flight);
        let rs = run_batch(&scenario(5_000.0), Policy::Stg, &sim, &sim, &EpisodeConfig::default(), 1, 2);
        let mut buf = Vec::new();
        write_results(&mut buf, "synthetic field", &rs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "scenario,policy,seed,duration_s,dives,path_m,reached");
        assert!(lines[2].starts_with("t,stg,"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn paired_seeds_share_the_world(seed in any::<u64>(), dist in 3_000.0f64..15_000.0) {
            let (f, b) = world(0.05, 0.15);
            let flight = FlightTable::default();
            let sim = DiveSimulator::new(&f, &b, noisy(), &flight);
            let cfg = EpisodeConfig {
                planner: PlannerConfig { n_trials: 10, n_threads: 1, max_depth: 2, action_set: vec![0.0], ..PlannerConfig::default() },
                ..EpisodeConfig::default()
            };
            // with only the zero bearing available both policies must coincide
            let sc = scenario(dist);
            let p = run_episode(&sc, Policy::Planner, &sim, &sim, &cfg, seed);
            let s = run_episode(&sc, Policy::Stg, &sim, &sim, &cfg, seed);
            prop_assert_eq!(&p.surfacings, &s.surfacings);
            prop_assert_eq!(world_bias(&sim, seed), world_bias(&sim, seed));
            // invariants of any episode
            let sum: f64 = s.surfacings.windows(2).map(|w| geodesic_distance(w[0].position, w[1].position)).sum();
            prop_assert!((s.path_length - sum).abs() <= 1e-9 * sum.max(1.0));
            if s.reached {
                prop_assert!(geodesic_distance(s.surfacings.last().unwrap().position, sc.goal) <= sc.rho);
                prop_assert!(s.path_length >= geodesic_distance(sc.start.position, sc.goal) - sc.rho);
            }
        }
    }
}

//! Online dive planner: root-parallel UCT with double progressive widening.
//!
//! Each tree searches over relative bearings from the current surfacing.
//! Leaves are scored with an inflated straight-line time-to-go instead of
//! rollouts. Independent trees vote on the final bearing.

mod tree;

pub use tree::{widening_cap, ActionNode, SearchProblem, SearchTree, StateNode, Terminal, Transition, TrialRecord};

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divesim::{Action, ControlParams, DiveSimulator, NoiseState};
use crate::geo::{bearing, geodesic_distance, GeoPosition, SurfaceState};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("every candidate dive left the forecast domain")]
    NoFeasibleAction,
    #[error("start is already within the goal radius")]
    AlreadyAtGoal,
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
}

/// Progressive widening constants: a node visited `N` times may have at most
/// `ceil(k * N^alpha)` children.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpwParams {
    pub k_a: f64,
    pub alpha_a: f64,
    pub k_s: f64,
    pub alpha_s: f64,
}

impl Default for DpwParams {
    fn default() -> Self {
        DpwParams { k_a: 1.0, alpha_a: 0.5, k_s: 1.0, alpha_s: 0.35 }
    }
}

pub const DEFAULT_HORIZON_CAP: f64 = 4.0 * 86_400.0;
pub const DEFAULT_EPS_HEUR: f64 = 1.77;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Candidate relative bearings (degrees); must contain 0.
    pub action_set: Vec<f64>,
    pub controls: ControlParams,
    pub n_trials: u64,
    /// Number of independent search trees.
    pub n_threads: usize,
    /// Cap on OS threads running the trees; all available cores when unset.
    /// The plan does not depend on it.
    pub max_workers: Option<usize>,
    /// Exploration constant, in cost units (s).
    pub c_ucb: f64,
    pub dpw: DpwParams,
    /// Maximum tree depth in dives.
    pub max_depth: u32,
    /// Cost assigned to failed dives, and the depth-in-time limit (s).
    pub horizon_cap: f64,
    pub eps_heur: f64,
    /// Wall-clock budget for one plan (all trees); trials stop once it is
    /// spent. Plans are reproducible only while the budget does not bind.
    pub time_budget_secs: Option<f64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            action_set: vec![-40.0, -20.0, 0.0, 20.0, 40.0],
            controls: ControlParams::default(),
            n_trials: 2000,
            n_threads: 8,
            max_workers: None,
            c_ucb: 0.5 * DEFAULT_HORIZON_CAP,
            dpw: DpwParams::default(),
            max_depth: 12,
            horizon_cap: DEFAULT_HORIZON_CAP,
            eps_heur: DEFAULT_EPS_HEUR,
            time_budget_secs: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::InvalidConfig(m.to_string()));
        if self.n_trials < 1 {
            return bad("n_trials must be at least 1");
        }
        if self.n_threads < 1 {
            return bad("n_threads must be at least 1");
        }
        if self.max_workers == Some(0) {
            return bad("max_workers must be at least 1");
        }
        if !self.action_set.contains(&0.0) {
            return bad("action_set must contain 0");
        }
        if self.action_set.iter().any(|a| !a.is_finite()) {
            return bad("action_set must be finite");
        }
        let d = &self.dpw;
        if !(d.alpha_a > 0.0 && d.alpha_a < 1.0 && d.alpha_s > 0.0 && d.alpha_s < 1.0) {
            return bad("widening exponents must lie in (0, 1)");
        }
        if !(d.k_a > 0.0 && d.k_s > 0.0) {
            return bad("widening coefficients must be positive");
        }
        if !(self.horizon_cap > 0.0 && self.c_ucb >= 0.0 && self.eps_heur >= 0.0) {
            return bad("horizon_cap must be positive, c_ucb and eps_heur non-negative");
        }
        Ok(())
    }

    fn action(&self, alpha: f64) -> Action {
        Action { alpha, controls: self.controls.clone() }
    }
}

/// Single-dive planning input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemInstance {
    pub start: SurfaceState,
    pub goal: GeoPosition,
    /// Goal radius (m).
    pub rho: f64,
}

impl ProblemInstance {
    pub fn in_goal(&self, p: GeoPosition) -> bool {
        geodesic_distance(p, self.goal) <= self.rho
    }
}

/// The dive MDP: surfaced states, relative-bearing actions, dive-duration
/// costs.
pub struct GliderProblem<'a> {
    pub instance: ProblemInstance,
    pub sim: DiveSimulator<'a>,
    pub controls: ControlParams,
    pub eps_heur: f64,
    /// Through-water speed used by the heuristic (m/s).
    pub speed: f64,
}

impl<'a> GliderProblem<'a> {
    pub fn new(instance: ProblemInstance, sim: DiveSimulator<'a>, cfg: &PlannerConfig) -> Result<Self, PlanError> {
        let speed =
            sim.flight.flight_speeds(&cfg.controls).map_err(|e| PlanError::InvalidConfig(e.to_string()))?.horizontal;
        Ok(GliderProblem { instance, sim, controls: cfg.controls.clone(), eps_heur: cfg.eps_heur, speed })
    }
}

impl SearchProblem for GliderProblem<'_> {
    type State = SurfaceState;
    type Episode = NoiseState;

    fn root(&self) -> SurfaceState {
        self.instance.start
    }

    fn new_episode(&self, rng: &mut ChaCha8Rng) -> NoiseState {
        self.sim.new_noise(rng)
    }

    fn is_goal(&self, s: &SurfaceState) -> bool {
        self.instance.in_goal(s.position)
    }

    fn transition(
        &self,
        s: &SurfaceState,
        alpha: f64,
        noise: &mut NoiseState,
        rng: &mut ChaCha8Rng,
    ) -> Transition<SurfaceState> {
        let Ok(beta) = bearing(s.position, self.instance.goal) else {
            return Transition::Next { state: *s, cost: 0.0 };
        };
        let action = Action { alpha, controls: self.controls.clone() };
        match self.sim.simulate_dive_with(*s, &action, beta, noise, rng) {
            Ok(next) => Transition::Next { state: next, cost: next.time - s.time },
            Err(_) => Transition::Failed,
        }
    }

    fn heuristic(&self, s: &SurfaceState) -> f64 {
        self.eps_heur * geodesic_distance(s.position, self.instance.goal) / self.speed
    }
}

/// Ordering used for every tie-break between bearings: smaller `|alpha|`
/// first, then negative before positive.
pub fn vote_order(a: f64, b: f64) -> Ordering {
    a.abs().total_cmp(&b.abs()).then(a.total_cmp(&b))
}

/// Modal bearing of the per-tree choices.
pub fn majority_vote(alphas: &[f64]) -> Option<f64> {
    let mut counts: Vec<(f64, usize)> = Vec::new();
    for &a in alphas {
        match counts.iter_mut().find(|(x, _)| *x == a) {
            Some((_, n)) => *n += 1,
            None => counts.push((a, 1)),
        }
    }
    counts.into_iter().min_by(|x, y| y.1.cmp(&x.1).then(vote_order(x.0, y.0))).map(|(a, _)| a)
}

/// Runs a search tree on any problem and returns the chosen bearing.
pub fn search<P: SearchProblem>(problem: &P, cfg: &PlannerConfig, seed: u64) -> Result<f64, PlanError> {
    let deadline = cfg.time_budget_secs.map(|s| Instant::now() + Duration::from_secs_f64(s));
    search_until(problem, cfg, seed, deadline)
}

/// As [`search`], stopping early at `deadline`. At least one trial runs.
pub fn search_until<P: SearchProblem>(
    problem: &P,
    cfg: &PlannerConfig,
    seed: u64,
    deadline: Option<Instant>,
) -> Result<f64, PlanError> {
    cfg.validate()?;
    if problem.is_goal(&problem.root()) {
        return Err(PlanError::AlreadyAtGoal);
    }
    let mut tree = SearchTree::new(problem, cfg, seed);
    for _ in 0..cfg.n_trials {
        tree.run_trial();
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
    }
    if tree.all_root_transitions_failed() {
        return Err(PlanError::NoFeasibleAction);
    }
    Ok(tree.robust_child().expect("at least one trial ran").alpha)
}

/// Root-parallel search: `cfg.n_threads` trees with seeds derived from
/// `seed`, combined by majority vote. Trees beyond the available cores run
/// one after another; the time budget covers the whole vote and is shared
/// evenly between the trees a worker runs.
pub fn search_parallel<P: SearchProblem>(problem: &P, cfg: &PlannerConfig, seed: u64) -> Result<f64, PlanError> {
    cfg.validate()?;
    let n = cfg.n_threads;
    let cores = std::thread::available_parallelism().map_or(1, |w| w.get());
    let workers = cfg.max_workers.unwrap_or(cores).clamp(1, n);
    let chunk_len = n.div_ceil(workers);
    let start = Instant::now();
    let budget = cfg.time_budget_secs.map(Duration::from_secs_f64);
    let deadline = |k: usize| budget.map(|b| start + b.mul_f64((k + 1) as f64 / chunk_len as f64));
    let mut results: Vec<Option<Result<f64, PlanError>>> = vec![None; n];
    let run_chunk = |c: usize, chunk: &mut [Option<Result<f64, PlanError>>]| {
        for (k, slot) in chunk.iter_mut().enumerate() {
            *slot = Some(search_until(problem, cfg, tree_seed(seed, c * chunk_len + k), deadline(k)));
        }
    };
    if workers <= 1 {
        run_chunk(0, &mut results);
    } else {
        std::thread::scope(|scope| {
            for (c, chunk) in results.chunks_mut(chunk_len).enumerate() {
                let run_chunk = &run_chunk;
                scope.spawn(move || run_chunk(c, chunk));
            }
        });
    }
    let mut alphas = Vec::with_capacity(n);
    let mut first_err = None;
    for r in results.into_iter().flatten() {
        match r {
            Ok(a) => alphas.push(a),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    majority_vote(&alphas).ok_or_else(|| first_err.unwrap_or(PlanError::NoFeasibleAction))
}

/// Seed of tree `j` in a root-parallel search.
pub fn tree_seed(seed: u64, j: usize) -> u64 {
    seed::derive(seed, &[0x7472_6565, j as u64])
}

/// One UCT tree on the dive MDP.
pub fn run_uct(
    instance: &ProblemInstance,
    sim: &DiveSimulator,
    cfg: &PlannerConfig,
    seed: u64,
) -> Result<Action, PlanError> {
    let problem = GliderProblem::new(*instance, *sim, cfg)?;
    search(&problem, cfg, seed).map(|a| cfg.action(a))
}

/// Next dive by majority vote over `cfg.n_threads` trees.
pub fn plan_next_dive(
    instance: &ProblemInstance,
    sim: &DiveSimulator,
    cfg: &PlannerConfig,
    seed: u64,
) -> Result<Action, PlanError> {
    let problem = GliderProblem::new(*instance, *sim, cfg)?;
    search_parallel(&problem, cfg, seed).map(|a| cfg.action(a))
}

/// Straight-to-goal baseline.
pub fn stg_policy(_instance: &ProblemInstance, cfg: &PlannerConfig) -> Action {
    cfg.action(0.0)
}

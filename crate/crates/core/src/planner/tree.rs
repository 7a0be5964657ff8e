//! UCT search tree with double progressive widening over a generic
//! stochastic shortest-path problem.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{vote_order, PlannerConfig};
use crate::seed;

/// Result of sampling one transition.
#[derive(Debug, Clone, PartialEq)]
pub enum Transition<S> {
    Next {
        state: S,
        cost: f64,
    },
    /// The transition could not be simulated (e.g. it left the forecast).
    Failed,
}

/// A cost-minimizing MDP the planner can search.
pub trait SearchProblem: Sync {
    type State: Clone;
    /// Per-trial world realization shared by every transition of one trial.
    type Episode;

    fn root(&self) -> Self::State;
    fn new_episode(&self, rng: &mut ChaCha8Rng) -> Self::Episode;
    fn is_goal(&self, s: &Self::State) -> bool;
    fn transition(
        &self,
        s: &Self::State,
        alpha: f64,
        episode: &mut Self::Episode,
        rng: &mut ChaCha8Rng,
    ) -> Transition<Self::State>;
    /// Estimated remaining cost from a non-goal leaf.
    fn heuristic(&self, s: &Self::State) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Goal,
    Failed,
}

#[derive(Debug, Clone)]
pub struct StateNode<S> {
    pub state: Option<S>,
    pub depth: u32,
    /// Accumulated cost from the root.
    pub cost: f64,
    pub visits: u64,
    pub value_sum: f64,
    pub terminal: Option<Terminal>,
    pub actions: Vec<usize>,
    untried: Vec<f64>,
}

impl<S> StateNode<S> {
    pub fn q(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.value_sum / self.visits as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct ActionNode {
    pub alpha: f64,
    pub visits: u64,
    pub value_sum: f64,
    pub outcomes: Vec<usize>,
}

impl ActionNode {
    pub fn q(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.value_sum / self.visits as f64
        }
    }
}

/// Trial path and cost, kept when trial recording is enabled.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub cost: f64,
}

/// Cap on children for a node visited `n` times.
pub fn widening_cap(k: f64, exponent: f64, n: u64) -> usize {
    (k * (n.max(1) as f64).powf(exponent)).ceil() as usize
}

pub struct SearchTree<'p, P: SearchProblem> {
    problem: &'p P,
    cfg: PlannerConfig,
    rng: ChaCha8Rng,
    seed: u64,
    trials_done: u64,
    pub states: Vec<StateNode<P::State>>,
    pub actions: Vec<ActionNode>,
    record: Option<Vec<TrialRecord>>,
}

impl<'p, P: SearchProblem> SearchTree<'p, P> {
    pub fn new(problem: &'p P, cfg: &PlannerConfig, seed: u64) -> Self {
        let root_state = problem.root();
        let terminal = problem.is_goal(&root_state).then_some(Terminal::Goal);
        let mut tree = SearchTree {
            problem,
            cfg: cfg.clone(),
            rng: seed::rng(seed::derive(seed, &[0])),
            seed,
            trials_done: 0,
            states: Vec::new(),
            actions: Vec::new(),
            record: None,
        };
        tree.push_state(Some(root_state), 0, 0.0, terminal);
        tree
    }

    /// Keeps every trial's path for later inspection.
    pub fn record_trials(mut self) -> Self {
        self.record = Some(Vec::new());
        self
    }

    pub fn trials(&self) -> Option<&[TrialRecord]> {
        self.record.as_deref()
    }

    pub fn trials_done(&self) -> u64 {
        self.trials_done
    }

    pub fn root(&self) -> &StateNode<P::State> {
        &self.states[0]
    }

    fn push_state(&mut self, state: Option<P::State>, depth: u32, cost: f64, terminal: Option<Terminal>) -> usize {
        // STG first, the rest in random order
        let mut rest: Vec<f64> = self.cfg.action_set.iter().copied().filter(|a| *a != 0.0).collect();
        rest.shuffle(&mut self.rng);
        let mut untried = rest;
        if self.cfg.action_set.contains(&0.0) {
            untried.push(0.0);
        }
        // popped from the back
        self.states.push(StateNode {
            state,
            depth,
            cost,
            visits: 0,
            value_sum: 0.0,
            terminal,
            actions: Vec::new(),
            untried,
        });
        self.states.len() - 1
    }

    fn leaf_value(&self, node: usize) -> f64 {
        let st = &self.states[node];
        match st.terminal {
            Some(Terminal::Goal) => st.cost,
            Some(Terminal::Failed) => st.cost + self.cfg.horizon_cap,
            None => st.cost + self.problem.heuristic(st.state.as_ref().expect("non-terminal state")),
        }
    }

    fn is_leaf(&self, node: usize) -> bool {
        let st = &self.states[node];
        st.terminal.is_some() || st.depth >= self.cfg.max_depth || st.cost >= self.cfg.horizon_cap
    }

    fn select_action(&mut self, node: usize) -> usize {
        let n = self.states[node].visits + 1;
        let cap = widening_cap(self.cfg.dpw.k_a, self.cfg.dpw.alpha_a, n);
        let st = &mut self.states[node];
        if st.actions.len() < cap {
            if let Some(alpha) = st.untried.pop() {
                self.actions.push(ActionNode { alpha, visits: 0, value_sum: 0.0, outcomes: Vec::new() });
                let id = self.actions.len() - 1;
                self.states[node].actions.push(id);
                return id;
            }
        }
        let st = &self.states[node];
        let parent = (st.visits.max(1) as f64).ln();
        let scale = self.cfg.horizon_cap;
        let explore = self.cfg.c_ucb / scale;
        let mut best = st.actions[0];
        let mut best_score = f64::INFINITY;
        for &a in &st.actions {
            let an = &self.actions[a];
            let score = if an.visits == 0 {
                f64::NEG_INFINITY
            } else {
                an.q() / scale - explore * (parent / an.visits as f64).sqrt()
            };
            if score < best_score {
                best_score = score;
                best = a;
            }
        }
        best
    }

    /// Runs one trial; returns its cost.
    pub fn run_trial(&mut self) -> f64 {
        let mut episode_rng = seed::rng(seed::derive(self.seed, &[1, self.trials_done]));
        let mut episode = self.problem.new_episode(&mut episode_rng);
        let mut path_states = vec![0usize];
        let mut path_actions = Vec::new();
        let mut node = 0usize;

        let cost = loop {
            if self.is_leaf(node) {
                break self.leaf_value(node);
            }
            let a = self.select_action(node);
            path_actions.push(a);

            let m = self.actions[a].visits + 1;
            let cap = widening_cap(self.cfg.dpw.k_s, self.cfg.dpw.alpha_s, m);
            if self.actions[a].outcomes.len() < cap {
                let parent = &self.states[node];
                let state = parent.state.as_ref().expect("expanded nodes hold a state");
                let (depth, base) = (parent.depth + 1, parent.cost);
                let alpha = self.actions[a].alpha;
                let child = match self.problem.transition(state, alpha, &mut episode, &mut episode_rng) {
                    Transition::Next { state, cost } => {
                        let terminal = self.problem.is_goal(&state).then_some(Terminal::Goal);
                        self.push_state(Some(state), depth, base + cost, terminal)
                    }
                    Transition::Failed => self.push_state(None, depth, base, Some(Terminal::Failed)),
                };
                self.actions[a].outcomes.push(child);
                path_states.push(child);
                break self.leaf_value(child);
            }
            let outcomes = &self.actions[a].outcomes;
            node = outcomes[self.rng.random_range(0..outcomes.len())];
            path_states.push(node);
        };

        for &s in &path_states {
            self.states[s].visits += 1;
            self.states[s].value_sum += cost;
        }
        for &a in &path_actions {
            self.actions[a].visits += 1;
            self.actions[a].value_sum += cost;
        }
        if let Some(rec) = self.record.as_mut() {
            rec.push(TrialRecord { states: path_states, actions: path_actions, cost });
        }
        self.trials_done += 1;
        cost
    }

    /// Root action with the most visits; ties go to the smaller `|alpha|`,
    /// then to the negative side.
    pub fn robust_child(&self) -> Option<&ActionNode> {
        self.root()
            .actions
            .iter()
            .map(|&a| &self.actions[a])
            .min_by(|x, y| y.visits.cmp(&x.visits).then(vote_order(x.alpha, y.alpha)))
    }

    /// True when every simulated root transition failed.
    pub fn all_root_transitions_failed(&self) -> bool {
        self.root()
            .actions
            .iter()
            .all(|&a| self.actions[a].outcomes.iter().all(|&s| self.states[s].terminal == Some(Terminal::Failed)))
    }

    /// Checks structural invariants: widening caps, STG-first expansion and,
    /// when trials were recorded, that node values are trial-cost means.
    pub fn validate(&self) -> Result<(), String> {
        let dpw = &self.cfg.dpw;
        for (i, st) in self.states.iter().enumerate() {
            let cap = widening_cap(dpw.k_a, dpw.alpha_a, st.visits);
            if st.actions.len() > cap {
                return Err(format!("state {i}: {} actions > cap {cap} at N={}", st.actions.len(), st.visits));
            }
            if let Some(&first) = st.actions.first() {
                if self.cfg.action_set.contains(&0.0) && self.actions[first].alpha != 0.0 {
                    return Err(format!("state {i}: first action is {}", self.actions[first].alpha));
                }
            }
            if st.value_sum < 0.0 {
                return Err(format!("state {i}: negative value"));
            }
            let child_visits: u64 = st.actions.iter().map(|&a| self.actions[a].visits).sum();
            if child_visits > st.visits {
                return Err(format!("state {i}: children visited {child_visits} > {}", st.visits));
            }
        }
        for (i, an) in self.actions.iter().enumerate() {
            let cap = widening_cap(dpw.k_s, dpw.alpha_s, an.visits);
            if an.outcomes.len() > cap {
                return Err(format!("action {i}: {} outcomes > cap {cap} at N={}", an.outcomes.len(), an.visits));
            }
        }
        if let Some(rec) = &self.record {
            let mut s_sum = vec![(0.0f64, 0u64); self.states.len()];
            let mut a_sum = vec![(0.0f64, 0u64); self.actions.len()];
            for t in rec {
                for &s in &t.states {
                    s_sum[s].0 += t.cost;
                    s_sum[s].1 += 1;
                }
                for &a in &t.actions {
                    a_sum[a].0 += t.cost;
                    a_sum[a].1 += 1;
                }
            }
            for (i, st) in self.states.iter().enumerate() {
                if s_sum[i].1 != st.visits {
                    return Err(format!("state {i}: visit count mismatch"));
                }
                if st.visits > 0 && (s_sum[i].0 / st.visits as f64 - st.q()).abs() > 1e-9 * st.q().abs().max(1.0) {
                    return Err(format!("state {i}: Q is not the mean trial cost"));
                }
            }
            for (i, an) in self.actions.iter().enumerate() {
                if a_sum[i].1 != an.visits {
                    return Err(format!("action {i}: visit count mismatch"));
                }
                if an.visits > 0 && (a_sum[i].0 / an.visits as f64 - an.q()).abs() > 1e-9 * an.q().abs().max(1.0) {
                    return Err(format!("action {i}: Q is not the mean trial cost"));
                }
            }
        }
        Ok(())
    }
}

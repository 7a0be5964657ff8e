//! Derivative-free maximization of J over a parameter box.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{score, CalibError, DiveRecord, Environments, ScoreConfig};
use crate::divesim::{FlightModel, SimParams};
use crate::seed;

/// Black-box maximizer over the unit box `[0, 1]^d`.
pub trait Optimizer {
    /// Next point to evaluate.
    fn ask(&mut self) -> Vec<f64>;
    /// Objective value of a point returned by the latest `ask`.
    fn tell(&mut self, x: &[f64], value: f64);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrossEntropyConfig {
    pub population: usize,
    pub elite_fraction: f64,
    /// Initial proposal spread in logit coordinates.
    pub initial_sd: f64,
    /// Weight of the new elite statistics in each update.
    pub smoothing: f64,
    pub min_sd: f64,
}

impl Default for CrossEntropyConfig {
    fn default() -> Self {
        CrossEntropyConfig { population: 16, elite_fraction: 0.25, initial_sd: 2.0, smoothing: 0.7, min_sd: 0.05 }
    }
}

/// Cross-entropy method with a diagonal Gaussian in logit coordinates. The
/// first proposal is the box center.
pub struct CrossEntropy {
    cfg: CrossEntropyConfig,
    mean: Vec<f64>,
    sd: Vec<f64>,
    batch: Vec<(Vec<f64>, f64)>,
    pending: Option<Vec<f64>>,
    asked: usize,
    rng: ChaCha8Rng,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl CrossEntropy {
    pub fn new(dim: usize, cfg: CrossEntropyConfig, seed: u64) -> Self {
        CrossEntropy {
            cfg,
            mean: vec![0.0; dim],
            sd: vec![cfg.initial_sd; dim],
            batch: Vec::new(),
            pending: None,
            asked: 0,
            rng: seed::rng(seed),
        }
    }

    fn n_elite(&self) -> usize {
        ((self.cfg.population as f64 * self.cfg.elite_fraction).round() as usize).clamp(1, self.cfg.population)
    }

    fn update(&mut self) {
        let mut batch = std::mem::take(&mut self.batch);
        batch.sort_by(|a, b| b.1.total_cmp(&a.1));
        let elite = &batch[..self.n_elite()];
        let k = elite.len() as f64;
        let w = self.cfg.smoothing;
        for d in 0..self.mean.len() {
            let m = elite.iter().map(|(z, _)| z[d]).sum::<f64>() / k;
            let v = elite.iter().map(|(z, _)| (z[d] - m).powi(2)).sum::<f64>() / k;
            self.mean[d] = w * m + (1.0 - w) * self.mean[d];
            self.sd[d] = (w * v.sqrt() + (1.0 - w) * self.sd[d]).max(self.cfg.min_sd);
        }
    }
}

impl Optimizer for CrossEntropy {
    fn ask(&mut self) -> Vec<f64> {
        let z: Vec<f64> = if self.asked == 0 {
            self.mean.clone()
        } else {
            self.mean
                .iter()
                .zip(&self.sd)
                .map(|(m, s)| {
                    let n: f64 = StandardNormal.sample(&mut self.rng);
                    m + s * n
                })
                .collect()
        };
        self.asked += 1;
        let x = z.iter().map(|v| sigmoid(*v)).collect();
        self.pending = Some(z);
        x
    }

    fn tell(&mut self, _x: &[f64], value: f64) {
        let z = self.pending.take().expect("tell follows ask");
        let value = if value.is_nan() { f64::NEG_INFINITY } else { value };
        self.batch.push((z, value));
        if self.batch.len() >= self.cfg.population {
            self.update();
        }
    }
}

/// Per-parameter box for the simulator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub lo: SimParams,
    pub hi: SimParams,
}

impl Default for ParamBounds {
    fn default() -> Self {
        ParamBounds {
            lo: SimParams {
                drag_i: 0.0,
                drag_j: 0.0,
                curr_mag: 0.0,
                curr_dir: 0.0,
                curr_min: 0.0,
                motion_mag: 0.0,
                motion_dir: 0.0,
                motion_min: 0.0,
            },
            hi: SimParams {
                drag_i: 2.0,
                drag_j: 2.0,
                curr_mag: 0.2,
                curr_dir: 45.0,
                curr_min: 0.1,
                motion_mag: 0.1,
                motion_dir: 20.0,
                motion_min: 0.3,
            },
        }
    }
}

impl ParamBounds {
    pub fn validate(&self) -> Result<(), CalibError> {
        let (lo, hi) = (self.lo.as_array(), self.hi.as_array());
        for (k, name) in SimParams::NAMES.iter().enumerate() {
            if !(lo[k] <= hi[k]) {
                return Err(CalibError::EmptyBounds(format!("{name}: [{}, {}]", lo[k], hi[k])));
            }
        }
        for p in [self.lo, self.hi] {
            p.validate().map_err(|e| CalibError::EmptyBounds(e.to_string()))?;
        }
        Ok(())
    }

    /// Maps unit-box coordinates into the box.
    pub fn point(&self, x: &[f64]) -> SimParams {
        let (lo, hi) = (self.lo.as_array(), self.hi.as_array());
        let mut out = [0.0; 8];
        for k in 0..8 {
            out[k] = lo[k] + x[k].clamp(0.0, 1.0) * (hi[k] - lo[k]);
        }
        SimParams::from_array(out)
    }

    pub fn center(&self) -> SimParams {
        self.point(&[0.5; 8])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeConfig {
    pub score: ScoreConfig,
    /// Number of proposals.
    pub n_iters: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub cem: CrossEntropyConfig,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            score: ScoreConfig::default(),
            n_iters: 500,
            train_fraction: 0.7,
            seed: 0,
            cem: CrossEntropyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibResult {
    pub params: SimParams,
    pub train_score: f64,
    pub validation_score: f64,
    /// Best training score found after each proposal.
    pub learning_curve: Vec<f64>,
}

/// Seeded random split; both parts non-empty when there are two or more
/// records.
pub fn split_dataset(records: &[DiveRecord], train_fraction: f64, seed: u64) -> (Vec<DiveRecord>, Vec<DiveRecord>) {
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(&mut seed::rng(seed));
    let n = records.len();
    let mut n_train = (train_fraction * n as f64).round() as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    }
    let (a, b) = idx.split_at(n_train.min(n));
    (a.iter().map(|&i| records[i].clone()).collect(), b.iter().map(|&i| records[i].clone()).collect())
}

/// Maximizes training-set J with the cross-entropy method and returns the
/// proposal with the best validation-set J among those that improved the
/// training best.
pub fn optimize(
    records: &[DiveRecord],
    envs: &Environments,
    flight: &dyn FlightModel,
    bounds: &ParamBounds,
    cfg: &OptimizeConfig,
) -> Result<CalibResult, CalibError> {
    let mut opt = CrossEntropy::new(8, cfg.cem, seed::derive(cfg.seed, &[2]));
    optimize_with(&mut opt, records, envs, flight, bounds, cfg)
}

/// As [`optimize`] with a caller-supplied optimizer.
pub fn optimize_with(
    opt: &mut dyn Optimizer,
    records: &[DiveRecord],
    envs: &Environments,
    flight: &dyn FlightModel,
    bounds: &ParamBounds,
    cfg: &OptimizeConfig,
) -> Result<CalibResult, CalibError> {
    bounds.validate()?;
    cfg.score.validate()?;
    if cfg.n_iters == 0 {
        return Err(CalibError::InvalidConfig("n_iters must be at least 1".into()));
    }
    if records.len() < 2 {
        return Err(CalibError::DatasetTooSmall(records.len(), 2));
    }
    let (train, val) = split_dataset(records, cfg.train_fraction, seed::derive(cfg.seed, &[1]));

    let mut curve = Vec::with_capacity(cfg.n_iters);
    let mut best_train = f64::NEG_INFINITY;
    let mut chosen: Option<CalibResult> = None;
    for _ in 0..cfg.n_iters {
        let x = opt.ask();
        let theta = bounds.point(&x);
        let j = score(&theta, &train, envs, flight, &cfg.score)?;
        opt.tell(&x, j);
        if j > best_train {
            best_train = j;
            let jv = score(&theta, &val, envs, flight, &cfg.score)?;
            if chosen.as_ref().is_none_or(|c| jv > c.validation_score) {
                chosen = Some(CalibResult {
                    params: theta,
                    train_score: j,
                    validation_score: jv,
                    learning_curve: Vec::new(),
                });
            }
        }
        curve.push(best_train);
    }
    let mut result = chosen.ok_or_else(|| CalibError::InvalidConfig("no finite score was found".into()))?;
    result.learning_curve = curve;
    Ok(result)
}

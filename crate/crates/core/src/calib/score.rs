//! The calibration score: per-dive Gaussian KDE log-likelihood of the true
//! surfacing minus a weighted spread penalty, both in tangent-plane meters.

use serde::{Deserialize, Serialize};

use super::{CalibError, DiveRecord, Environments};
use crate::divesim::{DiveSimulator, FlightModel, SimParams};
use crate::geo::LocalFrame;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed {
        meters: f64,
    },
    /// Scott's rule on each dive's samples, floored.
    Scott {
        floor_m: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreConfig {
    /// Samples per dive.
    pub samples: usize,
    pub bandwidth: Bandwidth,
    /// Weight of the spread penalty (1/m^2).
    pub lambda_reg: f64,
    pub seed: u64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig { samples: 40, bandwidth: Bandwidth::Scott { floor_m: 10.0 }, lambda_reg: 0.0, seed: 0 }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<(), CalibError> {
        let bad = |m: &str| Err(CalibError::InvalidConfig(m.to_string()));
        if self.samples < 2 {
            return bad("at least two samples per dive are required");
        }
        match self.bandwidth {
            Bandwidth::Fixed { meters } if !(meters > 0.0) => bad("fixed bandwidth must be positive"),
            Bandwidth::Scott { floor_m } if !(floor_m >= 0.0) => bad("bandwidth floor must be non-negative"),
            _ if !(self.lambda_reg >= 0.0) => bad("lambda_reg must be non-negative"),
            _ => Ok(()),
        }
    }
}

/// Scott's rule for an isotropic 2-D kernel: pooled standard deviation
/// times `n^(-1/6)`.
pub fn scott_bandwidth(samples: &[[f64; 2]]) -> f64 {
    let n = samples.len() as f64;
    let (mx, my) = mean(samples);
    let ss: f64 = samples.iter().map(|p| (p[0] - mx).powi(2) + (p[1] - my).powi(2)).sum();
    let sigma = (ss / (2.0 * (n - 1.0))).sqrt();
    sigma * n.powf(-1.0 / 6.0)
}

fn mean(samples: &[[f64; 2]]) -> (f64, f64) {
    let n = samples.len() as f64;
    let sx: f64 = samples.iter().map(|p| p[0]).sum();
    let sy: f64 = samples.iter().map(|p| p[1]).sum();
    (sx / n, sy / n)
}

/// Log density at `x` of the isotropic Gaussian KDE over `samples`.
pub fn kde_log_density(samples: &[[f64; 2]], h: f64, x: [f64; 2]) -> f64 {
    let h2 = h * h;
    let logs: Vec<f64> =
        samples.iter().map(|p| -((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)) / (2.0 * h2)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    max + sum.ln() - (samples.len() as f64).ln() - (2.0 * std::f64::consts::PI * h2).ln()
}

/// Log-likelihood and spread contributions of one record.
pub(crate) fn record_terms(
    i: usize,
    r: &DiveRecord,
    theta: &SimParams,
    envs: &Environments,
    flight: &dyn FlightModel,
    cfg: &ScoreConfig,
) -> Result<(f64, f64), CalibError> {
    let (field, bathy) = envs.lookup(i, r)?;
    let sim = DiveSimulator::new(field, bathy, *theta, flight);
    let frame = LocalFrame::new(r.start.position);
    let mut pts = Vec::with_capacity(cfg.samples);
    for j in 0..cfg.samples {
        let s = seed::derive(cfg.seed, &[i as u64, j as u64]);
        let post = sim
            .simulate_dive(r.start, &r.action, r.beta, s)
            .map_err(|source| CalibError::Simulation { record: i, source })?;
        pts.push(frame.project(post.position));
    }
    let h = match cfg.bandwidth {
        Bandwidth::Fixed { meters } => meters,
        Bandwidth::Scott { floor_m } => scott_bandwidth(&pts).max(floor_m),
    };
    if !(h > 0.0) {
        return Err(CalibError::DegenerateKde { record: i, samples: cfg.samples });
    }
    let log_p = kde_log_density(&pts, h, frame.project(r.true_post.position));
    let (mx, my) = mean(&pts);
    let spread: f64 = pts.iter().map(|p| (p[0] - mx).powi(2) + (p[1] - my).powi(2)).sum();
    Ok((log_p, spread))
}

/// J(theta) over `records`. Sample `j` of record `i` uses a seed derived from
/// `(cfg.seed, i, j)`, so the score is a deterministic function of its inputs.
pub fn score(
    theta: &SimParams,
    records: &[DiveRecord],
    envs: &Environments,
    flight: &dyn FlightModel,
    cfg: &ScoreConfig,
) -> Result<f64, CalibError> {
    cfg.validate()?;
    theta.validate().map_err(|e| CalibError::InvalidConfig(e.to_string()))?;
    let mut log_lik = 0.0;
    let mut spread = 0.0;
    for (i, r) in records.iter().enumerate() {
        let (l, s) = record_terms(i, r, theta, envs, flight, cfg)?;
        log_lik += l;
        spread += s;
    }
    Ok(log_lik - cfg.lambda_reg * spread)
}

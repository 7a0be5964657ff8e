use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::SimParams;

/// Forecast bias drawn once per episode and applied to every current lookup.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CurrentBias {
    /// Added to the current speed (m/s).
    pub magnitude: f64,
    /// Added to the current direction (degrees).
    pub direction: f64,
}

impl CurrentBias {
    pub fn draw<R: Rng + ?Sized>(params: &SimParams, rng: &mut R) -> Self {
        CurrentBias { magnitude: gaussian(params.curr_mag, rng), direction: gaussian(params.curr_dir, rng) }
    }
}

fn gaussian<R: Rng + ?Sized>(std: f64, rng: &mut R) -> f64 {
    if std > 0.0 {
        Normal::new(0.0, std).expect("finite std").sample(rng)
    } else {
        0.0
    }
}

/// Symmetric integer random walk with absorbing barriers at `±barrier`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomWalk {
    state: i32,
    barrier: i32,
}

impl RandomWalk {
    pub fn new(barrier: u32) -> Self {
        RandomWalk { state: 0, barrier: barrier as i32 }
    }

    pub fn state(&self) -> i32 {
        self.state
    }

    pub fn is_absorbed(&self) -> bool {
        self.state.abs() >= self.barrier
    }

    /// Moves -1, 0 or +1 with equal probability unless absorbed.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.is_absorbed() {
            return;
        }
        self.state += rng.random_range(-1..=1);
    }

    pub fn reset(&mut self) {
        self.state = 0;
    }
}

/// All stochastic state of one simulated episode.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseState {
    pub bias: CurrentBias,
    pub magnitude_walk: RandomWalk,
    pub direction_walk: RandomWalk,
}

impl NoiseState {
    /// Draws a fresh forecast bias; both walks start at zero.
    pub fn new_episode<R: Rng + ?Sized>(params: &SimParams, barrier: u32, rng: &mut R) -> Self {
        NoiseState {
            bias: CurrentBias::draw(params, rng),
            magnitude_walk: RandomWalk::new(barrier),
            direction_walk: RandomWalk::new(barrier),
        }
    }

    /// No bias, walks at zero.
    pub fn quiet(barrier: u32) -> Self {
        NoiseState {
            bias: CurrentBias::default(),
            magnitude_walk: RandomWalk::new(barrier),
            direction_walk: RandomWalk::new(barrier),
        }
    }

    pub fn reset_walks(&mut self) {
        self.magnitude_walk.reset();
        self.direction_walk.reset();
    }
}

/// Perturbs a vector in polar form and floors its magnitude.
fn perturb_polar(u: f64, v: f64, d_mag: f64, d_dir_deg: f64, min_mag: f64) -> (f64, f64) {
    let mag = u.hypot(v);
    if d_mag == 0.0 && d_dir_deg == 0.0 && mag >= min_mag {
        return (u, v);
    }
    let dir = v.atan2(u) + d_dir_deg.to_radians();
    let mag = (mag + d_mag).max(min_mag);
    (mag * dir.cos(), mag * dir.sin())
}

/// Applies the episode's forecast bias to a looked-up current.
pub fn get_noisy_currents(u: f64, v: f64, noise: &NoiseState, params: &SimParams) -> (f64, f64) {
    perturb_polar(u, v, noise.bias.magnitude, noise.bias.direction, params.curr_min)
}

/// Steps both motion walks and perturbs the through-water velocity.
pub fn apply_motion_noise<R: Rng + ?Sized>(
    u_g: f64,
    v_g: f64,
    noise: &mut NoiseState,
    params: &SimParams,
    rng: &mut R,
) -> (f64, f64) {
    noise.magnitude_walk.step(rng);
    noise.direction_walk.step(rng);
    perturb_polar(
        u_g,
        v_g,
        noise.magnitude_walk.state() as f64 * params.motion_mag,
        noise.direction_walk.state() as f64 * params.motion_dir,
        params.motion_min,
    )
}

/// Couples the noisy current into the glider velocity, east and north gains
/// applied separately. The vertical component passes through.
pub fn apply_curr_accel(glider: [f64; 3], current: (f64, f64), params: &SimParams) -> [f64; 3] {
    [glider[0] + params.drag_i * current.0, glider[1] + params.drag_j * current.1, glider[2]]
}

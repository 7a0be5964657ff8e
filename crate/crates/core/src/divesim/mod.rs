//! Steady-state dive simulator.
//!
//! A dive is `2 * n_yos` alternating descent and ascent segments. Each
//! segment flies at constant attitude and advances the glider one forecast
//! cell at a time: look up the current, perturb it with the episode's
//! forecast bias, couple it into the glider velocity, then move straight to
//! the next cell edge (plus a small overshoot).

mod flight;
mod noise;

pub use flight::{FlightModel, FlightSpeeds, FlightTable};
pub use noise::{apply_curr_accel, apply_motion_noise, get_noisy_currents, CurrentBias, NoiseState, RandomWalk};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envfield::{Bathymetry, CurrentField, EnvError, Velocity};
use crate::geo::{heading_from_action, meters_per_deg_lon, GeoPosition, SurfaceState, METERS_PER_DEG_LAT};

/// Hard cap on cell transitions per dive.
const MAX_STEPS_PER_DIVE: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("dive left the forecast domain: {0}")]
    OutOfDomain(String),
    #[error("glider velocity too small to make progress")]
    Stalled,
    #[error("unknown instruction set {0:?}")]
    UnknownInstructionSet(String),
    #[error("invalid simulator input: {0}")]
    InvalidInput(String),
}

impl From<EnvError> for SimError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Stalled => SimError::Stalled,
            other => SimError::OutOfDomain(other.to_string()),
        }
    }
}

/// Glider state inside a dive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InternalState {
    pub position: GeoPosition,
    /// Meters below the surface.
    pub depth: f64,
    pub time: f64,
}

impl InternalState {
    pub fn at_surface(s: SurfaceState) -> Self {
        InternalState { position: s.position, depth: 0.0, time: s.time }
    }

    /// Moves along `vel` for `dt` seconds.
    pub fn advance(&mut self, vel: Velocity, dt: f64) {
        let lat = self.position.lat;
        self.position.lon += vel.east * dt / meters_per_deg_lon(lat);
        self.position.lat += vel.north * dt / METERS_PER_DEG_LAT;
        self.depth += vel.down * dt;
        self.time += dt;
    }
}

/// Dive control parameters of one instruction set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlParams {
    pub n_yos: u32,
    /// Yo floor (m).
    pub z_bottom: f64,
    /// Yo ceiling (m).
    pub z_top: f64,
    pub theta_dive: f64,
    pub theta_climb: f64,
    /// Buoyancy change.
    pub chi: f64,
    /// Name of the flight profile these controls fly with.
    pub instruction_set: String,
}

impl ControlParams {
    pub const DEFAULT_INSTRUCTION_SET: &'static str = "default";

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_yos < 1 {
            return Err(SimError::InvalidInput("n_yos must be at least 1".into()));
        }
        if !(self.z_top >= 0.0 && self.z_top < self.z_bottom && self.z_bottom.is_finite()) {
            return Err(SimError::InvalidInput(format!(
                "need 0 <= z_top < z_bottom, got z_top={} z_bottom={}",
                self.z_top, self.z_bottom
            )));
        }
        Ok(())
    }
}

impl Default for ControlParams {
    fn default() -> Self {
        ControlParams {
            n_yos: 5,
            z_bottom: 95.0,
            z_top: 0.0,
            theta_dive: 26.0,
            theta_climb: 26.0,
            chi: 260.0,
            instruction_set: Self::DEFAULT_INSTRUCTION_SET.to_string(),
        }
    }
}

/// One dive decision: relative bearing to the goal plus controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub alpha: f64,
    pub controls: ControlParams,
}

/// Simulator noise and current-coupling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub drag_i: f64,
    pub drag_j: f64,
    pub curr_mag: f64,
    pub curr_dir: f64,
    pub curr_min: f64,
    pub motion_mag: f64,
    pub motion_dir: f64,
    pub motion_min: f64,
}

impl SimParams {
    /// Full current advection, no noise.
    pub fn deterministic() -> Self {
        SimParams {
            drag_i: 1.0,
            drag_j: 1.0,
            curr_mag: 0.0,
            curr_dir: 0.0,
            curr_min: 0.0,
            motion_mag: 0.0,
            motion_dir: 0.0,
            motion_min: 0.0,
        }
    }

    pub fn as_array(&self) -> [f64; 8] {
        [
            self.drag_i,
            self.drag_j,
            self.curr_mag,
            self.curr_dir,
            self.curr_min,
            self.motion_mag,
            self.motion_dir,
            self.motion_min,
        ]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        SimParams {
            drag_i: a[0],
            drag_j: a[1],
            curr_mag: a[2],
            curr_dir: a[3],
            curr_min: a[4],
            motion_mag: a[5],
            motion_dir: a[6],
            motion_min: a[7],
        }
    }

    pub const NAMES: [&'static str; 8] =
        ["drag_i", "drag_j", "curr_mag", "curr_dir", "curr_min", "motion_mag", "motion_dir", "motion_min"];

    pub fn validate(&self) -> Result<(), SimError> {
        let a = self.as_array();
        if a.iter().any(|x| !x.is_finite()) {
            return Err(SimError::InvalidInput("non-finite simulator parameter".into()));
        }
        if !(0.0..=2.0).contains(&self.drag_i) || !(0.0..=2.0).contains(&self.drag_j) {
            return Err(SimError::InvalidInput("drag gains must lie in [0, 2]".into()));
        }
        if a[2..].iter().any(|x| *x < 0.0) {
            return Err(SimError::InvalidInput("noise levels and floors must be non-negative".into()));
        }
        Ok(())
    }
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams::deterministic()
    }
}

/// Numerical settings of the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Overshoot past each cell boundary (s).
    pub epsilon: f64,
    /// Absorbing barrier of the motion-noise walks.
    pub walk_barrier: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { epsilon: 1e-3, walk_barrier: 3 }
    }
}

/// One straight-line step between cell boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiveStep {
    pub start: InternalState,
    /// Current after forecast-bias perturbation.
    pub noisy_current: (f64, f64),
    pub velocity: Velocity,
    pub duration: f64,
    pub descending: bool,
}

/// Samples post-dive surfacing states.
#[derive(Clone, Copy)]
pub struct DiveSimulator<'a> {
    pub field: &'a CurrentField,
    pub bathy: &'a Bathymetry,
    pub params: SimParams,
    pub flight: &'a dyn FlightModel,
    pub config: SimConfig,
}

impl<'a> DiveSimulator<'a> {
    pub fn new(field: &'a CurrentField, bathy: &'a Bathymetry, params: SimParams, flight: &'a dyn FlightModel) -> Self {
        DiveSimulator { field, bathy, params, flight, config: SimConfig::default() }
    }

    pub fn with_config(mut self, config: SimConfig) -> Self {
        self.config = config;
        self
    }

    pub fn new_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> NoiseState {
        NoiseState::new_episode(&self.params, self.config.walk_barrier, rng)
    }

    /// Simulates one dive with noise drawn from `seed`.
    pub fn simulate_dive(
        &self,
        s: SurfaceState,
        action: &Action,
        beta: f64,
        seed: u64,
    ) -> Result<SurfaceState, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noise = self.new_noise(&mut rng);
        self.simulate_dive_with(s, action, beta, &mut noise, &mut rng)
    }

    /// Simulates one dive under an existing episode noise state. The walks
    /// restart at zero; the forecast bias is kept.
    pub fn simulate_dive_with<R: Rng + ?Sized>(
        &self,
        s: SurfaceState,
        action: &Action,
        beta: f64,
        noise: &mut NoiseState,
        rng: &mut R,
    ) -> Result<SurfaceState, SimError> {
        self.simulate_dive_observed(s, action, beta, noise, rng, |_| {})
    }

    /// As [`simulate_dive_with`](Self::simulate_dive_with), reporting every
    /// step to `observe`.
    pub fn simulate_dive_observed<R: Rng + ?Sized, F: FnMut(&DiveStep)>(
        &self,
        s: SurfaceState,
        action: &Action,
        beta: f64,
        noise: &mut NoiseState,
        rng: &mut R,
        mut observe: F,
    ) -> Result<SurfaceState, SimError> {
        let c = &action.controls;
        c.validate()?;
        let speeds = self.flight.flight_speeds(c)?;
        let psi = heading_from_action(action.alpha, beta);
        let (sin_psi, cos_psi) = psi.to_radians().sin_cos();
        let through_water = (speeds.horizontal * sin_psi, speeds.horizontal * cos_psi);

        noise.reset_walks();
        let mut g = InternalState::at_surface(s);
        let mut steps = 0usize;
        for half in 0..2 * c.n_yos {
            let descending = half % 2 == 0;
            self.steady_segment(
                &mut g,
                descending,
                through_water,
                speeds.depth_rate,
                c,
                noise,
                rng,
                &mut steps,
                &mut observe,
            )?;
        }
        Ok(SurfaceState { position: g.position, time: g.time })
    }

    #[allow(clippy::too_many_arguments)]
    fn steady_segment<R: Rng + ?Sized, F: FnMut(&DiveStep)>(
        &self,
        g: &mut InternalState,
        descending: bool,
        through_water: (f64, f64),
        depth_rate: f64,
        c: &ControlParams,
        noise: &mut NoiseState,
        rng: &mut R,
        steps: &mut usize,
        observe: &mut F,
    ) -> Result<(), SimError> {
        let down = if descending { depth_rate } else { -depth_rate };
        loop {
            let z_lim = if descending { c.z_bottom.min(self.bathy.lookup_bathy(g.position)?) } else { c.z_top };
            if (descending && g.depth >= z_lim) || (!descending && g.depth <= z_lim) {
                // inflect exactly at the limit; any overshoot is at most epsilon * depth_rate
                g.depth = z_lim;
                return Ok(());
            }

            *steps += 1;
            if *steps > MAX_STEPS_PER_DIVE {
                return Err(SimError::Stalled);
            }

            let (u_g, v_g) = apply_motion_noise(through_water.0, through_water.1, noise, &self.params, rng);
            let cell = self.field.locate(g)?;
            let (u, v) = self.field.value(cell);
            let noisy = get_noisy_currents(u, v, noise, &self.params);
            let [east, north, _] = apply_curr_accel([u_g, v_g, down], noisy, &self.params);
            let vel = Velocity { east, north, down };

            let mut dt = self.field.time_to_exit_from(cell, g, vel, z_lim)?;
            if descending {
                dt = dt.min(self.bathy.time_to_cell_exit(g.position, east, north)?);
            }
            // reaching the inflection depth ends the segment, no overshoot needed
            let to_limit = (z_lim - g.depth) / down;
            let hits_limit = dt >= to_limit;
            let step = if hits_limit { to_limit } else { dt + self.config.epsilon };
            observe(&DiveStep { start: *g, noisy_current: noisy, velocity: vel, duration: step, descending });
            g.advance(vel, step);
            if hits_limit {
                g.depth = z_lim;
                return Ok(());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envfield::{synth_bathy, synth_field, BathyKind, FieldKind, GridSpec};
    use crate::geo::{bearing, geodesic_distance, LocalFrame};

    fn grid() -> GridSpec {
        let depths = (0..=30).map(|i| i as f64 * 10.0).collect();
        GridSpec::regular((-2.0, 0.0), 40, (56.0, 58.0), 40, depths, (0.0, 5.0 * 86_400.0), 120).unwrap()
    }

    fn start() -> SurfaceState {
        SurfaceState::new(GeoPosition { lon: -1.0, lat: 57.0 }, 3_600.0)
    }

    fn one_yo() -> Action {
        Action {
            alpha: 0.0,
            controls: ControlParams { n_yos: 1, z_bottom: 150.0, z_top: 0.0, ..ControlParams::default() },
        }
    }

    #[test]
    fn closed_form_kinematics_without_current() {
        let g = grid();
        let field = synth_field(&FieldKind::Uniform { u: 0.0, v: 0.0 }, &g).unwrap();
        let bathy = synth_bathy(&BathyKind::Flat { depth: 95.0 }, &g.lon_edges, &g.lat_edges).unwrap();
        let flight = FlightTable::default();
        let sim = DiveSimulator::new(&field, &bathy, SimParams::deterministic(), &flight);
        let out = sim.simulate_dive(start(), &one_yo(), 90.0, 7).unwrap();
        let duration = out.time - start().time;
        assert!((duration - 1900.0).abs() / 1900.0 < 1e-6, "{duration}");
        let d = geodesic_distance(start().position, out.position);
        assert!((d - 570.0).abs() / 570.0 < 1e-3, "{d}");
        assert!((bearing(start().position, out.position).unwrap() - 90.0).abs() < 0.01);
    }

    #[test]
    fn uniform_current_adds_drift() {
        let g = grid();
        let field = synth_field(&FieldKind::Uniform { u: 0.2, v: 0.0 }, &g).unwrap();
        let bathy = synth_bathy(&BathyKind::Flat { depth: 95.0 }, &g.lon_edges, &g.lat_edges).unwrap();
        let flight = FlightTable::default();
        let sim = DiveSimulator::new(&field, &bathy, SimParams::deterministic(), &flight);
        // heading north so the drift is orthogonal
        let out = sim.simulate_dive(start(), &one_yo(), 0.0, 7).unwrap();
        let [e, n] = LocalFrame::new(start().position).project(out.position);
        assert!((e - 380.0).abs() < 0.5, "{e}");
        assert!((n - 570.0).abs() < 0.5, "{n}");
    }

    #[test]
    fn seeded_dives_are_bit_identical() {
        let g = grid();
        let field =
            synth_field(&FieldKind::Tidal { amplitude: 0.3, period: 44_700.0, phase: 0.0, direction: 45.0 }, &g)
                .unwrap();
        let bathy = synth_bathy(&BathyKind::Flat { depth: 95.0 }, &g.lon_edges, &g.lat_edges).unwrap();
        let flight = FlightTable::default();
        let params = SimParams {
            curr_mag: 0.05,
            curr_dir: 10.0,
            motion_mag: 0.02,
            motion_dir: 5.0,
            ..SimParams::deterministic()
        };
        let sim = DiveSimulator::new(&field, &bathy, params, &flight);
        let a = Action { alpha: 20.0, controls: ControlParams::default() };
        let x = sim.simulate_dive(start(), &a, 45.0, 99).unwrap();
        let y = sim.simulate_dive(start(), &a, 45.0, 99).unwrap();
        assert_eq!(x.position.lon.to_bits(), y.position.lon.to_bits());
        assert_eq!(x.position.lat.to_bits(), y.position.lat.to_bits());
        assert_eq!(x.time.to_bits(), y.time.to_bits());
        let z = sim.simulate_dive(start(), &a, 45.0, 100).unwrap();
        assert_ne!(x, z);
    }

    #[test]
    fn leaving_the_grid_fails() {
        let g =
            GridSpec::regular((-1.001, -0.999), 1, (56.999, 57.001), 1, vec![0.0, 200.0], (0.0, 86_400.0), 1).unwrap();
        let field = synth_field(&FieldKind::Uniform { u: 0.0, v: 0.0 }, &g).unwrap();
        let bathy = synth_bathy(&BathyKind::Flat { depth: 95.0 }, &g.lon_edges, &g.lat_edges).unwrap();
        let flight = FlightTable::default();
        let sim = DiveSimulator::new(&field, &bathy, SimParams::deterministic(), &flight);
        let err = sim.simulate_dive(start(), &one_yo(), 0.0, 1).unwrap_err();
        assert!(matches!(err, SimError::OutOfDomain(_)), "{err}");
    }

    #[test]
    fn depth_respects_floor_and_bias_is_constant() {
        let g = grid();
        let field =
            synth_field(&FieldKind::Gyre { center: GeoPosition { lon: -1.0, lat: 57.0 }, omega: 2e-5 }, &g).unwrap();
        let bathy =
            synth_bathy(&BathyKind::Step { split_lon: -0.99, west: 80.0, east: 120.0 }, &g.lon_edges, &g.lat_edges)
                .unwrap();
        let flight = FlightTable::default();
        let params = SimParams {
            curr_mag: 0.05,
            curr_dir: 15.0,
            motion_mag: 0.02,
            motion_dir: 5.0,
            ..SimParams::deterministic()
        };
        let sim = DiveSimulator::new(&field, &bathy, params, &flight);
        let a =
            Action { alpha: -20.0, controls: ControlParams { n_yos: 3, z_bottom: 110.0, ..ControlParams::default() } };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut noise = sim.new_noise(&mut rng);
        let bias = noise.bias;
        let eps = sim.config.epsilon;
        let mut n = 0;
        sim.simulate_dive_observed(start(), &a, 90.0, &mut noise, &mut rng, |step| {
            n += 1;
            let (u, v) = field.lookup_current(&step.start).unwrap();
            let mut check = NoiseState::quiet(3);
            check.bias = bias;
            assert_eq!(step.noisy_current, get_noisy_currents(u, v, &check, &params));
            let floor = bathy.lookup_bathy(step.start.position).unwrap().min(110.0);
            let end_depth = step.start.depth + step.velocity.down * step.duration;
            assert!(end_depth <= floor + eps * 0.1 + 1e-9, "{end_depth} > {floor}");
        })
        .unwrap();
        assert!(n > 10);
    }

    #[test]
    fn invalid_controls_rejected() {
        let g = grid();
        let field = synth_field(&FieldKind::Uniform { u: 0.0, v: 0.0 }, &g).unwrap();
        let bathy = synth_bathy(&BathyKind::Flat { depth: 95.0 }, &g.lon_edges, &g.lat_edges).unwrap();
        let flight = FlightTable::default();
        let sim = DiveSimulator::new(&field, &bathy, SimParams::deterministic(), &flight);
        let mut a = one_yo();
        a.controls.n_yos = 0;
        assert!(matches!(sim.simulate_dive(start(), &a, 0.0, 1), Err(SimError::InvalidInput(_))));
        a.controls.n_yos = 1;
        a.controls.z_top = 200.0;
        assert!(sim.simulate_dive(start(), &a, 0.0, 1).is_err());
    }
}

//! C interface to the glidenav dive simulator, planner and waypoint builder.
//!
//! Every fallible function returns a [`GnStatus`]. On failure a description
//! is kept per thread and can be read with [`gn_last_error_message`].
//! Handles are opaque; free them with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use glidenav::divesim::{Action, ControlParams, DiveSimulator, FlightSpeeds, FlightTable, SimError, SimParams};
use glidenav::envfield::{load_bathy, load_field, Bathymetry, CurrentField, EnvError};
use glidenav::geo::{bearing, geodesic_distance, GeoPosition, SurfaceState};
use glidenav::navplan::{to_wpt_list, WaypointParams};
use glidenav::planner::{plan_next_dive, PlanError, PlannerConfig, ProblemInstance};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    MalformedFile = 4,
    OutOfDomain = 5,
    Stalled = 6,
    NoFeasibleAction = 7,
    AlreadyAtGoal = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnPosition {
    pub lon: f64,
    pub lat: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnSurfaceState {
    pub lon: f64,
    pub lat: f64,
    /// Seconds.
    pub time: f64,
}

/// Dive controls. Flown with the environment's flight speeds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnControls {
    pub n_yos: u32,
    pub z_bottom: f64,
    pub z_top: f64,
    pub theta_dive: f64,
    pub theta_climb: f64,
    pub chi: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnSimParams {
    pub drag_i: f64,
    pub drag_j: f64,
    pub curr_mag: f64,
    pub curr_dir: f64,
    pub curr_min: f64,
    pub motion_mag: f64,
    pub motion_dir: f64,
    pub motion_min: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnPlannerOptions {
    pub n_trials: u64,
    /// Number of voting trees.
    pub n_threads: u32,
    pub max_depth: u32,
}

/// Forecast, bathymetry, simulator parameters and flight speeds.
pub struct GnEnvironment {
    field: CurrentField,
    bathy: Bathymetry,
    params: SimParams,
    flight: FlightTable,
}

impl GnEnvironment {
    fn simulator(&self) -> DiveSimulator<'_> {
        DiveSimulator::new(&self.field, &self.bathy, self.params, &self.flight)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(GnStatus, String);

impl From<EnvError> for Failure {
    fn from(e: EnvError) -> Self {
        let status = match e {
            EnvError::OutOfDomain { .. } => GnStatus::OutOfDomain,
            EnvError::Stalled => GnStatus::Stalled,
            EnvError::MalformedFile { .. } | EnvError::InvalidGrid(_) => GnStatus::MalformedFile,
            EnvError::InvalidParams(_) => GnStatus::InvalidArgument,
            EnvError::Io(_) => GnStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let status = match e {
            SimError::OutOfDomain(_) => GnStatus::OutOfDomain,
            SimError::Stalled => GnStatus::Stalled,
            SimError::UnknownInstructionSet(_) | SimError::InvalidInput(_) => GnStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        let status = match e {
            PlanError::NoFeasibleAction => GnStatus::NoFeasibleAction,
            PlanError::AlreadyAtGoal => GnStatus::AlreadyAtGoal,
            PlanError::InvalidConfig(_) => GnStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(GnStatus::InvalidArgument, msg.into())
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GnStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GnStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass either null or a pointer to a live, aligned T.
    unsafe { p.as_ref() }.ok_or_else(|| Failure(GnStatus::NullPointer, format!("{name} is null")))
}

fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: as for `non_null`, with exclusive access for the call.
    unsafe { p.as_mut() }.ok_or_else(|| Failure(GnStatus::NullPointer, format!("{name} is null")))
}

fn path_arg<'a>(p: *const c_char, name: &str) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(Failure(GnStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: non-null and NUL-terminated per the API contract.
    let s = unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| invalid(format!("{name} is not UTF-8")))?;
    Ok(Path::new(s))
}

fn position(p: GnPosition) -> Result<GeoPosition, Failure> {
    GeoPosition::new(p.lon, p.lat).map_err(|e| invalid(e.to_string()))
}

fn surface_state(s: &GnSurfaceState) -> Result<SurfaceState, Failure> {
    if !s.time.is_finite() {
        return Err(invalid("time is not finite"));
    }
    Ok(SurfaceState::new(position(GnPosition { lon: s.lon, lat: s.lat })?, s.time))
}

fn controls(c: &GnControls) -> ControlParams {
    ControlParams {
        n_yos: c.n_yos,
        z_bottom: c.z_bottom,
        z_top: c.z_top,
        theta_dive: c.theta_dive,
        theta_climb: c.theta_climb,
        chi: c.chi,
        instruction_set: ControlParams::DEFAULT_INSTRUCTION_SET.to_string(),
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default dive controls: 5 yos between 0 and 95 m.
#[no_mangle]
pub extern "C" fn gn_controls_default() -> GnControls {
    let c = ControlParams::default();
    GnControls {
        n_yos: c.n_yos,
        z_bottom: c.z_bottom,
        z_top: c.z_top,
        theta_dive: c.theta_dive,
        theta_climb: c.theta_climb,
        chi: c.chi,
    }
}

#[no_mangle]
pub extern "C" fn gn_planner_options_default() -> GnPlannerOptions {
    let c = PlannerConfig::default();
    GnPlannerOptions { n_trials: c.n_trials, n_threads: c.n_threads as u32, max_depth: c.max_depth }
}

/// Loads a current field and bathymetry from grid files. Simulator noise
/// starts at zero and flight speeds at their defaults.
///
/// # Safety
/// `field_path` and `bathy_path` must be NUL-terminated strings and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gn_environment_load(
    field_path: *const c_char,
    bathy_path: *const c_char,
    out: *mut *mut GnEnvironment,
) -> GnStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let field = load_field(path_arg(field_path, "field_path")?)?;
        let bathy = load_bathy(path_arg(bathy_path, "bathy_path")?)?;
        let env = GnEnvironment { field, bathy, params: SimParams::deterministic(), flight: FlightTable::default() };
        *out = Box::into_raw(Box::new(env));
        Ok(())
    })
}

/// # Safety
/// `env` must come from [`gn_environment_load`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gn_environment_free(env: *mut GnEnvironment) {
    if !env.is_null() {
        // SAFETY: created by Box::into_raw in gn_environment_load.
        drop(unsafe { Box::from_raw(env) });
    }
}

/// # Safety
/// `env` and `params` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gn_environment_set_params(env: *mut GnEnvironment, params: *const GnSimParams) -> GnStatus {
    guard(|| {
        let env = out_ptr(env, "env")?;
        let p = non_null(params, "params")?;
        let params = SimParams {
            drag_i: p.drag_i,
            drag_j: p.drag_j,
            curr_mag: p.curr_mag,
            curr_dir: p.curr_dir,
            curr_min: p.curr_min,
            motion_mag: p.motion_mag,
            motion_dir: p.motion_dir,
            motion_min: p.motion_min,
        };
        params.validate()?;
        env.params = params;
        Ok(())
    })
}

/// Sets the horizontal speed and depth rate (m/s) used for every dive.
///
/// # Safety
/// `env` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gn_environment_set_flight_speeds(
    env: *mut GnEnvironment,
    horizontal: f64,
    depth_rate: f64,
) -> GnStatus {
    guard(|| {
        let env = out_ptr(env, "env")?;
        if !(horizontal > 0.0 && depth_rate > 0.0 && horizontal.is_finite() && depth_rate.is_finite()) {
            return Err(invalid("flight speeds must be positive and finite"));
        }
        env.flight = FlightTable::constant(FlightSpeeds { horizontal, depth_rate });
        Ok(())
    })
}

/// Simulates one dive flown at relative bearing `alpha` to goal bearing
/// `beta` (degrees). The same seed gives the same surfacing.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gn_simulate_dive(
    env: *const GnEnvironment,
    start: *const GnSurfaceState,
    alpha: f64,
    beta: f64,
    controls_in: *const GnControls,
    seed: u64,
    out: *mut GnSurfaceState,
) -> GnStatus {
    guard(|| {
        let env = non_null(env, "env")?;
        let start = surface_state(non_null(start, "start")?)?;
        let action = Action { alpha, controls: controls(non_null(controls_in, "controls")?) };
        let out = out_ptr(out, "out")?;
        let s = env.simulator().simulate_dive(start, &action, beta, seed)?;
        *out = GnSurfaceState { lon: s.position.lon, lat: s.position.lat, time: s.time };
        Ok(())
    })
}

/// Plans the next dive toward `goal` and writes the chosen relative bearing
/// to `alpha_out`. Candidate bearings are -40, -20, 0, 20 and 40 degrees.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gn_plan_next_dive(
    env: *const GnEnvironment,
    start: *const GnSurfaceState,
    goal: GnPosition,
    rho: f64,
    controls_in: *const GnControls,
    options: *const GnPlannerOptions,
    seed: u64,
    alpha_out: *mut f64,
) -> GnStatus {
    guard(|| {
        let env = non_null(env, "env")?;
        let start = surface_state(non_null(start, "start")?)?;
        let opts = non_null(options, "options")?;
        let alpha_out = out_ptr(alpha_out, "alpha_out")?;
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid("rho must be positive"));
        }
        let cfg = PlannerConfig {
            controls: controls(non_null(controls_in, "controls")?),
            n_trials: opts.n_trials,
            n_threads: opts.n_threads as usize,
            max_depth: opts.max_depth,
            ..PlannerConfig::default()
        };
        cfg.validate()?;
        let instance = ProblemInstance { start, goal: position(goal)?, rho };
        let action = plan_next_dive(&instance, &env.simulator(), &cfg, seed)?;
        *alpha_out = action.alpha;
        Ok(())
    })
}

/// Builds the waypoint list for relative bearing `alpha` from `p0`. At most
/// `n_bck + 1` positions are written to `out`; `len_out` receives the count.
/// Distances are in meters.
///
/// # Safety
/// `out` must point to `capacity` writable positions and `len_out` must be
/// valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn gn_waypoints(
    alpha: f64,
    p0: GnPosition,
    goal_curr: GnPosition,
    goal_next: GnPosition,
    rho: f64,
    rho_wpt: f64,
    n_bck: usize,
    out: *mut GnPosition,
    capacity: usize,
    len_out: *mut usize,
) -> GnStatus {
    guard(|| {
        let len_out = out_ptr(len_out, "len_out")?;
        *len_out = 0;
        if !(rho > 0.0 && rho_wpt > rho && alpha.is_finite()) {
            return Err(invalid("need 0 < rho < rho_wpt and a finite alpha"));
        }
        let (p0, gc, gn) = (position(p0)?, position(goal_curr)?, position(goal_next)?);
        let list = to_wpt_list(alpha, p0, gc, gn, WaypointParams { rho, rho_wpt, n_bck });
        if list.len() > capacity {
            *len_out = list.len();
            return Err(Failure(GnStatus::BufferTooSmall, format!("need room for {} waypoints", list.len())));
        }
        if out.is_null() && !list.is_empty() {
            return Err(Failure(GnStatus::NullPointer, "out is null".into()));
        }
        for (i, p) in list.iter().enumerate() {
            // SAFETY: i < list.len() <= capacity.
            unsafe { out.add(i).write(GnPosition { lon: p.lon, lat: p.lat }) };
        }
        *len_out = list.len();
        Ok(())
    })
}

/// Great-circle distance in meters; NaN for invalid positions.
#[no_mangle]
pub extern "C" fn gn_geodesic_distance(a: GnPosition, b: GnPosition) -> f64 {
    match (position(a), position(b)) {
        (Ok(a), Ok(b)) => geodesic_distance(a, b),
        _ => f64::NAN,
    }
}

/// Initial bearing from `a` to `b` in degrees from north.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gn_bearing(a: GnPosition, b: GnPosition, out: *mut f64) -> GnStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = bearing(position(a)?, position(b)?).map_err(|e| invalid(e.to_string()))?;
        Ok(())
    })
}

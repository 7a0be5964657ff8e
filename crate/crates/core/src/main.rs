use std::collections::BTreeMap;
use std::fmt::Display;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use glidenav::calib::{
    self, clean_dataset, load_dive_records, optimize, save_dive_records, synth_dive_records, Environments,
    OptimizeConfig, ParamBounds, ScoreConfig, SynthDives,
};
use glidenav::config::{AppConfig, Transport};
use glidenav::divesim::{Action, DiveSimulator, FlightTable, SimParams};
use glidenav::envfield::{
    load_bathy, load_field, save_bathy, save_field, synth_bathy, synth_field, BathyKind, FieldKind, GridSpec,
};
use glidenav::geo::{bearing, geodesic_distance, heading_from_action, GeoPosition, SurfaceState};
use glidenav::harness::{
    episode_seed, format_summary, mean_stg_dives, run_episode, save_results, select_scenarios, summarize,
    EpisodeConfig, EpisodeResult, Policy, Scenario, DEFAULT_SELECTION_REPS,
};
use glidenav::navplan::to_wpt_list;
use glidenav::planner::{plan_next_dive, ProblemInstance};
use glidenav::plot::{line_chart, ChartOptions, Series};
use glidenav::service::{serve_lines, serve_tcp, Service, ServiceSetup};

#[derive(Parser)]
#[command(name = "glidenav", version, about = "Glider navigation planning under uncertain ocean-current forecasts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one dive and print the surfacing state.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        /// Relative bearing to the goal (degrees).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        goal_index: usize,
        /// Defaults to the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write every integration step as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Plan the next dive and print the action and waypoint list.
    Plan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        #[arg(long, default_value_t = 0)]
        goal_index: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Fit simulator parameters to logged dives.
    Calibrate {
        /// Dive records CSV. Field and bathymetry paths in it are relative to
        /// the file.
        #[arg(long)]
        dives: PathBuf,
        /// Fitted parameters (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Mission config supplying the flight table.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Learning curve CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Parameter box (JSON with `lo` and `hi`).
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 40)]
        samples: usize,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip data cleaning.
        #[arg(long)]
        no_clean: bool,
    },
    /// Run paired planner and straight-to-goal episodes.
    Replay {
        #[arg(long)]
        config: PathBuf,
        /// JSON list of scenarios.
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        #[arg(long, value_enum, default_value_t = PolicyArg::Both)]
        policy: PolicyArg,
        /// Per-episode results CSV.
        #[arg(long)]
        out: PathBuf,
        /// Summary table file.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Surfacing positions of every episode as CSV.
        #[arg(long)]
        traces: Option<PathBuf>,
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Pick Favourable, Neutral and Unfavourable scenarios from candidates.
    SelectScenarios {
        #[arg(long)]
        config: PathBuf,
        /// JSON list of candidate scenarios.
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SELECTION_REPS)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the planning service.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        transport: Option<TransportArg>,
        #[arg(long)]
        listen: Option<String>,
    },
    /// Render columns of a CSV file as an SVG line chart.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Comma-separated columns; one line per distinct combination.
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "")]
        title: String,
        /// Same scale on both axes.
        #[arg(long)]
        equal_aspect: bool,
    },
    /// Write a synthetic current field and bathymetry.
    SynthField {
        /// TOML grid and field description.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        bathy: PathBuf,
    },
    /// Simulate a synthetic dive-record corpus with the config's parameters.
    SynthDives {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Planner,
    Stg,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Stdio,
    Tcp,
}

enum Failure {
    Config(String),
    Data(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) | Failure::Runtime(m) => m,
        }
    }
}

fn config_err(e: impl Display) -> Failure {
    Failure::Config(e.to_string())
}

fn data_err(e: impl Display) -> Failure {
    Failure::Data(e.to_string())
}

fn runtime_err(e: impl Display) -> Failure {
    Failure::Runtime(e.to_string())
}

type Res<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cmd: Command) -> Res<()> {
    match cmd {
        Command::Simulate { config, lat, lon, time, alpha, goal_index, seed, trace } => {
            simulate(&config, lat, lon, time, alpha, goal_index, seed, trace.as_deref())
        }
        Command::Plan { config, lat, lon, time, goal_index, seed, trials, threads } => {
            plan(&config, lat, lon, time, goal_index, seed, trials, threads)
        }
        Command::Calibrate { dives, out, config, curve, bounds, iters, samples, lambda, seed, no_clean } => {
            let cfg = OptimizeConfig {
                score: ScoreConfig { samples, lambda_reg: lambda, seed, ..ScoreConfig::default() },
                n_iters: iters,
                seed,
                ..OptimizeConfig::default()
            };
            calibrate(&dives, &out, config.as_deref(), curve.as_deref(), bounds.as_deref(), &cfg, !no_clean)
        }
        Command::Replay { config, scenarios, seeds, policy, out, summary, traces, trials } => {
            replay(&config, &scenarios, seeds, policy, &out, summary.as_deref(), traces.as_deref(), trials)
        }
        Command::SelectScenarios { config, candidates, reps, out } => select(&config, &candidates, reps, &out),
        Command::Serve { config, transport, listen } => serve(&config, transport, listen),
        Command::Plot { input, x, y, group, out, title, equal_aspect } => {
            plot(&input, &x, &y, group.as_deref(), &out, title, equal_aspect)
        }
        Command::SynthField { spec, field, bathy } => synth_env(&spec, &field, &bathy),
        Command::SynthDives { config, n, seed, out } => synth_dives(&config, n, seed, &out),
    }
}

/// Config plus everything it references.
struct Loaded {
    cfg: AppConfig,
    field: glidenav::envfield::CurrentField,
    bathy: glidenav::envfield::Bathymetry,
    params: SimParams,
}

impl Loaded {
    fn open(path: &Path) -> Res<Self> {
        let cfg = AppConfig::load(path).map_err(config_err)?;
        let (field, bathy) = cfg.load_environment().map_err(data_err)?;
        let params = cfg.sim_params().map_err(data_err)?;
        Ok(Loaded { cfg, field, bathy, params })
    }

    fn simulator(&self) -> DiveSimulator<'_> {
        DiveSimulator::new(&self.field, &self.bathy, self.params, &self.cfg.flight)
    }

    fn goal(&self, index: usize) -> Res<GeoPosition> {
        let goals = &self.cfg.mission.goals;
        goals
            .get(index)
            .copied()
            .ok_or_else(|| Failure::Config(format!("goal index {index} out of range (0..{})", goals.len())))
    }
}

fn position(lat: f64, lon: f64) -> Res<GeoPosition> {
    GeoPosition::new(lon, lat).map_err(config_err)
}

fn write_file(path: &Path, bytes: &[u8]) -> Res<()> {
    std::fs::write(path, bytes).map_err(|e| runtime_err(format!("cannot write {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Res<T> {
    let text = std::fs::read_to_string(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn print_json(v: &impl Serialize) -> Res<()> {
    println!("{}", serde_json::to_string_pretty(v).map_err(runtime_err)?);
    Ok(())
}

#[derive(Serialize)]
struct SimulateOutput {
    start: SurfaceState,
    alpha: f64,
    beta: f64,
    heading: f64,
    surfacing: SurfaceState,
    duration_s: f64,
    distance_m: f64,
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    config: &Path,
    lat: f64,
    lon: f64,
    time: f64,
    alpha: f64,
    goal_index: usize,
    seed: Option<u64>,
    trace: Option<&Path>,
) -> Res<()> {
    let env = Loaded::open(config)?;
    let start = SurfaceState::new(position(lat, lon)?, time);
    let goal = env.goal(goal_index)?;
    let beta = bearing(start.position, goal).map_err(config_err)?;
    let action = Action { alpha, controls: env.cfg.mission.controls.clone() };
    let sim = env.simulator();
    let mut rng = glidenav::seed::rng(seed.unwrap_or(env.cfg.seed));
    let mut noise = sim.new_noise(&mut rng);
    let mut steps = Vec::new();
    let end = sim
        .simulate_dive_observed(start, &action, beta, &mut noise, &mut rng, |s| steps.push(*s))
        .map_err(runtime_err)?;
    if let Some(path) = trace {
        let mut w = csv::Writer::from_path(path).map_err(runtime_err)?;
        w.write_record(["time", "lon", "lat", "depth", "current_u", "current_v", "duration"]).map_err(runtime_err)?;
        for s in &steps {
            let g = s.start;
            w.serialize((
                g.time,
                g.position.lon,
                g.position.lat,
                g.depth,
                s.noisy_current.0,
                s.noisy_current.1,
                s.duration,
            ))
            .map_err(runtime_err)?;
        }
        w.serialize((end.time, end.position.lon, end.position.lat, 0.0, f64::NAN, f64::NAN, 0.0))
            .map_err(runtime_err)?;
        w.flush().map_err(runtime_err)?;
    }
    print_json(&SimulateOutput {
        start,
        alpha,
        beta,
        heading: heading_from_action(alpha, beta),
        surfacing: end,
        duration_s: end.time - start.time,
        distance_m: geodesic_distance(start.position, end.position),
    })
}

#[derive(Serialize)]
struct PlanOutput {
    alpha: f64,
    beta: f64,
    heading: f64,
    goal_index: usize,
    waypoints: Vec<GeoPosition>,
}

#[allow(clippy::too_many_arguments)]
fn plan(
    config: &Path,
    lat: f64,
    lon: f64,
    time: f64,
    goal_index: usize,
    seed: Option<u64>,
    trials: Option<u64>,
    threads: Option<usize>,
) -> Res<()> {
    let env = Loaded::open(config)?;
    let mut planner = env.cfg.planner.clone();
    if let Some(n) = trials {
        planner.n_trials = n;
    }
    if let Some(n) = threads {
        planner.n_threads = n;
    }
    planner.validate().map_err(config_err)?;
    let mission = &env.cfg.mission;
    let goal = env.goal(goal_index)?;
    let next = mission.goals[(goal_index + 1) % mission.goals.len()];
    let start = SurfaceState::new(position(lat, lon)?, time);
    let beta = bearing(start.position, goal).map_err(config_err)?;
    let instance = ProblemInstance { start, goal, rho: mission.rho };
    let sim = env.simulator();
    let action = plan_next_dive(&instance, &sim, &planner, seed.unwrap_or(env.cfg.seed)).map_err(runtime_err)?;
    let wpts = to_wpt_list(action.alpha, start.position, goal, next, mission.waypoint_params());
    print_json(&PlanOutput {
        alpha: action.alpha,
        beta,
        heading: heading_from_action(action.alpha, beta),
        goal_index,
        waypoints: wpts.0,
    })
}

fn resolve(base: &Path, name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.is_relative() {
        base.join(p)
    } else {
        p.to_path_buf()
    }
}

#[derive(Serialize)]
struct CalibrateOutput {
    records: usize,
    used: usize,
    params: SimParams,
    train_score: f64,
    validation_score: f64,
}

fn calibrate(
    dives: &Path,
    out: &Path,
    config: Option<&Path>,
    curve: Option<&Path>,
    bounds: Option<&Path>,
    cfg: &OptimizeConfig,
    clean: bool,
) -> Res<()> {
    let flight = match config {
        Some(p) => AppConfig::load(p).map_err(config_err)?.flight,
        None => FlightTable::default(),
    };
    let bounds: ParamBounds = match bounds {
        Some(p) => read_json(p)?,
        None => ParamBounds::default(),
    };
    bounds.validate().map_err(config_err)?;
    cfg.score.validate().map_err(config_err)?;
    let records = load_dive_records(dives).map_err(data_err)?;
    let used = if clean { clean_dataset(&records).map_err(data_err)? } else { records.clone() };
    let base = dives.parent().unwrap_or(Path::new("."));
    let mut envs = Environments::default();
    for r in &used {
        if !envs.fields.contains_key(&r.field) {
            let p = resolve(base, &r.field);
            let f = load_field(&p).map_err(|e| data_err(format!("{}: {e}", p.display())))?;
            envs.fields.insert(r.field.clone(), f);
        }
        if !envs.bathys.contains_key(&r.bathy) {
            let p = resolve(base, &r.bathy);
            let b = load_bathy(&p).map_err(|e| data_err(format!("{}: {e}", p.display())))?;
            envs.bathys.insert(r.bathy.clone(), b);
        }
    }
    let result = optimize(&used, &envs, &flight, &bounds, cfg).map_err(|e| match e {
        calib::CalibError::DatasetTooSmall(..) | calib::CalibError::UnknownEnvironment { .. } => data_err(e),
        calib::CalibError::EmptyBounds(_) | calib::CalibError::InvalidConfig(_) => config_err(e),
        _ => runtime_err(e),
    })?;
    write_file(out, serde_json::to_string_pretty(&result.params).map_err(runtime_err)?.as_bytes())?;
    if let Some(path) = curve {
        let mut w = csv::Writer::from_path(path).map_err(runtime_err)?;
        w.write_record(["iteration", "best_train_j"]).map_err(runtime_err)?;
        for (i, j) in result.learning_curve.iter().enumerate() {
            w.serialize((i + 1, j)).map_err(runtime_err)?;
        }
        w.flush().map_err(runtime_err)?;
    }
    print_json(&CalibrateOutput {
        records: records.len(),
        used: used.len(),
        params: result.params,
        train_score: result.train_score,
        validation_score: result.validation_score,
    })
}

#[allow(clippy::too_many_arguments)]
fn replay(
    config: &Path,
    scenarios: &Path,
    seeds: usize,
    policy: PolicyArg,
    out: &Path,
    summary: Option<&Path>,
    traces: Option<&Path>,
    trials: Option<u64>,
) -> Res<()> {
    let env = Loaded::open(config)?;
    let scenarios: Vec<Scenario> = read_json(scenarios)?;
    if scenarios.is_empty() || seeds == 0 {
        return Err(Failure::Config("need at least one scenario and one seed".into()));
    }
    let mut ep = EpisodeConfig { planner: env.cfg.planner.clone(), ..EpisodeConfig::default() };
    if let Some(n) = trials {
        ep.planner.n_trials = n;
    }
    ep.planner.validate().map_err(config_err)?;
    let policies: &[Policy] = match policy {
        PolicyArg::Planner => &[Policy::Planner],
        PolicyArg::Stg => &[Policy::Stg],
        PolicyArg::Both => &[Policy::Stg, Policy::Planner],
    };
    let sim = env.simulator();
    let mut results: Vec<EpisodeResult> = Vec::new();
    for (i, sc) in scenarios.iter().enumerate() {
        let base = glidenav::seed::derive(env.cfg.seed, &[i as u64]);
        for &p in policies {
            for k in 0..seeds {
                results.push(run_episode(sc, p, &sim, &sim, &ep, episode_seed(base, k)));
            }
        }
    }
    let note = format!(
        "forecast {} replayed as ground truth (desk-scale stand-in for archived forecasts); sim params {}; {} paired seeds per scenario",
        env.cfg.data.field.display(),
        serde_json::to_string(&env.params).map_err(runtime_err)?,
        seeds
    );
    save_results(out, &note, &results).map_err(runtime_err)?;
    if let Some(path) = traces {
        let mut w = csv::Writer::from_path(path).map_err(runtime_err)?;
        w.write_record(["scenario", "policy", "seed", "surfacing", "lon", "lat", "time"]).map_err(runtime_err)?;
        for r in &results {
            for (n, s) in r.surfacings.iter().enumerate() {
                w.serialize((&r.label, r.policy.name(), r.seed, n, s.position.lon, s.position.lat, s.time))
                    .map_err(runtime_err)?;
            }
        }
        w.flush().map_err(runtime_err)?;
    }
    let table = format!("# {note}\n{}", format_summary(&summarize(&results)));
    print!("{table}");
    if let Some(path) = summary {
        write_file(path, table.as_bytes())?;
    }
    Ok(())
}

fn select(config: &Path, candidates: &Path, reps: usize, out: &Path) -> Res<()> {
    let env = Loaded::open(config)?;
    let candidates: Vec<Scenario> = read_json(candidates)?;
    let ep = EpisodeConfig { planner: env.cfg.planner.clone(), ..EpisodeConfig::default() };
    let sim = env.simulator();
    let chosen = select_scenarios(&candidates, &sim, &ep, reps, env.cfg.seed).map_err(config_err)?;
    let means = mean_stg_dives(&chosen, &sim, &ep, reps, env.cfg.seed);
    for (s, m) in chosen.iter().zip(&means) {
        eprintln!("{:<13} mean straight-to-goal dives {m:.2}", s.label);
    }
    write_file(out, serde_json::to_string_pretty(&chosen).map_err(runtime_err)?.as_bytes())
}

fn serve(config: &Path, transport: Option<TransportArg>, listen: Option<String>) -> Res<()> {
    let env = Loaded::open(config)?;
    let Loaded { cfg, field, bathy, params } = env;
    let mut planner = cfg.planner.clone();
    planner.time_budget_secs = Some(cfg.service.planning_budget_secs);
    let setup = ServiceSetup {
        field,
        bathy,
        params,
        flight: cfg.flight.clone(),
        planner,
        seed: cfg.seed,
        state_dir: cfg.service.state_dir.clone(),
    };
    let service = Service::open(setup).map_err(data_err)?;
    for id in &cfg.service.gliders {
        service.configure(id, cfg.mission.clone(), true).map_err(config_err)?;
    }
    let transport = match transport {
        Some(TransportArg::Stdio) => Transport::Stdio,
        Some(TransportArg::Tcp) => Transport::Tcp,
        None => cfg.service.transport,
    };
    match transport {
        Transport::Stdio => {
            let stdin = std::io::stdin();
            serve_lines(&service, stdin.lock(), std::io::stdout().lock()).map_err(runtime_err)
        }
        Transport::Tcp => {
            let addr = listen.unwrap_or(cfg.service.listen);
            let listener =
                TcpListener::bind(&addr).map_err(|e| runtime_err(format!("cannot listen on {addr}: {e}")))?;
            eprintln!("listening on {addr}");
            serve_tcp(Arc::new(service), listener).map_err(runtime_err)
        }
    }
}

fn plot(input: &Path, x: &str, y: &str, group: Option<&str>, out: &Path, title: String, equal_aspect: bool) -> Res<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(input)
        .map_err(|e| data_err(format!("{}: {e}", input.display())))?;
    let headers = rdr.headers().map_err(data_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Failure::Config(format!("no column {name:?} in {}", input.display())))
    };
    let (xi, yi) = (col(x)?, col(y)?);
    let groups: Vec<usize> = match group {
        Some(g) => g.split(',').map(|c| col(c.trim())).collect::<Res<_>>()?,
        None => Vec::new(),
    };
    let mut series: Vec<Series> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(data_err)?;
        let num = |i: usize| row.get(i).and_then(|v| v.trim().parse::<f64>().ok()).unwrap_or(f64::NAN);
        let key = groups.iter().map(|&i| row.get(i).unwrap_or("")).collect::<Vec<_>>().join(" ");
        let k = *index.entry(key.clone()).or_insert_with(|| {
            series.push(Series { name: if key.is_empty() { y.to_string() } else { key }, points: Vec::new() });
            series.len() - 1
        });
        series[k].points.push((num(xi), num(yi)));
    }
    let opts =
        ChartOptions { title, x_label: x.to_string(), y_label: y.to_string(), equal_aspect, ..ChartOptions::default() };
    write_file(out, line_chart(&series, &opts).as_bytes())
}

/// Grid and contents of a synthetic environment.
#[derive(Deserialize)]
struct SynthSpec {
    lon: (f64, f64),
    n_lon: usize,
    lat: (f64, f64),
    n_lat: usize,
    depth_edges: Vec<f64>,
    time: (f64, f64),
    n_time: usize,
    field: FieldKind,
    bathy: BathyKind,
}

fn synth_env(spec: &Path, field_out: &Path, bathy_out: &Path) -> Res<()> {
    let text = std::fs::read_to_string(spec).map_err(|e| config_err(format!("{}: {e}", spec.display())))?;
    let s: SynthSpec = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", spec.display())))?;
    let grid =
        GridSpec::regular(s.lon, s.n_lon, s.lat, s.n_lat, s.depth_edges, s.time, s.n_time).map_err(config_err)?;
    let field = synth_field(&s.field, &grid).map_err(config_err)?;
    let bathy = synth_bathy(&s.bathy, &grid.lon_edges, &grid.lat_edges).map_err(config_err)?;
    save_field(&field, field_out).map_err(runtime_err)?;
    save_bathy(&bathy, bathy_out).map_err(runtime_err)
}

/// `path` relative to `dir` when it lies below it, otherwise absolute.
fn relative_name(path: &Path, dir: &Path) -> Res<String> {
    let abs = path.canonicalize().map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let dir = dir.canonicalize().map_err(|e| runtime_err(format!("{}: {e}", dir.display())))?;
    let p = abs.strip_prefix(&dir).map(Path::to_path_buf).unwrap_or(abs);
    Ok(p.to_string_lossy().into_owned())
}

fn synth_dives(config: &Path, n: usize, seed: Option<u64>, out: &Path) -> Res<()> {
    let env = Loaded::open(config)?;
    let out_dir = match out.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let spec = SynthDives {
        n,
        controls: env.cfg.mission.controls.clone(),
        action_set: env.cfg.mission.action_set.clone(),
        field: relative_name(&env.cfg.data.field, &out_dir)?,
        bathy: relative_name(&env.cfg.data.bathy, &out_dir)?,
        seed: seed.unwrap_or(env.cfg.seed),
    };
    let records = synth_dive_records(&env.simulator(), &spec).map_err(runtime_err)?;
    save_dive_records(out, &records).map_err(runtime_err)?;
    eprintln!("wrote {} dives to {}", records.len(), out.display());
    Ok(())
}

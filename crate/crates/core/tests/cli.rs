//! End-to-end runs of the command-line tool.

use std::path::Path;
use std::process::{Command, Output};

use glidenav::envfield::{save_bathy, save_field, synth_bathy, synth_field, BathyKind, FieldKind, GridSpec};
use glidenav::geo::{angle_diff_deg, bearing, GeoPosition};

const BIN: &str = env!("CARGO_BIN_EXE_glidenav");

fn write_fixture(dir: &Path, v: f64, field_name: &str) {
    let spec =
        GridSpec::regular((-6.0, -5.0), 20, (56.0, 56.6), 20, vec![0.0, 100.0, 300.0], (0.0, 864_000.0), 10).unwrap();
    save_field(&synth_field(&FieldKind::Uniform { u: 0.0, v }, &spec).unwrap(), dir.join("field.ogf")).unwrap();
    save_bathy(
        &synth_bathy(&BathyKind::Flat { depth: 300.0 }, &spec.lon_edges, &spec.lat_edges).unwrap(),
        dir.join("bathy.ogf"),
    )
    .unwrap();
    let config = format!(
        r#"seed = 3
[mission]
goals = [{{ lon = -5.50, lat = 56.30 }}, {{ lon = -5.70, lat = 56.30 }}]
rho = 1000.0
rho_wpt = 7000.0
n_bck = 2
[mission.controls]
n_yos = 3
[data]
field = "{field_name}"
bathy = "bathy.ogf"
[planner]
n_trials = 300
n_threads = 4
"#
    );
    std::fs::write(dir.join("mission.toml"), config).unwrap();
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const START: [&str; 4] = ["--lat", "56.30", "--lon", "-5.70"];

#[test]
fn plan_in_still_water_flies_straight_to_goal() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), 0.0, "field.ogf");
    let out = json(&run(dir.path(), &[&["plan", "--config", "mission.toml"], &START[..]].concat()));
    assert_eq!(out["alpha"], 0.0);
    let start = GeoPosition { lon: -5.70, lat: 56.30 };
    let goal = GeoPosition { lon: -5.50, lat: 56.30 };
    let w0 = &out["waypoints"][0];
    let w0 = GeoPosition { lon: w0["lon"].as_f64().unwrap(), lat: w0["lat"].as_f64().unwrap() };
    assert!(angle_diff_deg(bearing(start, w0).unwrap(), bearing(start, goal).unwrap()) < 1e-6);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), 0.2, "field.ogf");
    let args = [&["simulate", "--config", "mission.toml", "--alpha", "-20", "--seed", "9"], &START[..]].concat();
    let a = run(dir.path(), &args);
    let b = run(dir.path(), &args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert!(v["duration_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), 0.0, "missing.ogf");
    let out = run(dir.path(), &[&["simulate", "--config", "mission.toml"], &START[..]].concat());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out.stderr.is_empty());

    let out = run(dir.path(), &[&["simulate", "--config", "absent.toml"], &START[..]].concat());
    assert_eq!(out.status.code(), Some(2));

    write_fixture(dir.path(), 0.0, "field.ogf");
    let out = run(dir.path(), &["simulate", "--config", "mission.toml", "--lat", "10.0", "--lon", "-5.7"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

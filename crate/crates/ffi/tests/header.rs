use std::path::Path;
use std::process::Command;

const PROGRAM: &str = r#"
#include "glidenav.h"
#include <stdio.h>

int main(void) {
    GnEnvironment *env = NULL;
    if (gn_environment_load("field.ogf", "bathy.ogf", &env) != GN_STATUS_OK) {
        fprintf(stderr, "%s\n", gn_last_error_message());
        return 1;
    }
    GnSurfaceState start = {-5.6, 56.4, 0.0};
    GnControls controls = gn_controls_default();
    GnPlannerOptions opts = gn_planner_options_default();
    GnPosition goal = {-5.4, 56.5};
    double alpha = 0.0;
    GnSurfaceState end;
    gn_plan_next_dive(env, &start, goal, 2000.0, &controls, &opts, 7, &alpha);
    gn_simulate_dive(env, &start, alpha, 60.0, &controls, 7, &end);
    GnPosition wpts[3];
    size_t n = 0;
    GnPosition p0 = {start.lon, start.lat};
    gn_waypoints(alpha, p0, goal, p0, 2000.0, 7000.0, 2, wpts, 3, &n);
    gn_environment_free(env);
    return 0;
}
"#;

#[test]
fn header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = include.join("glidenav.h");
    assert!(header.exists(), "build script did not write {}", header.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use_header.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = match Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .output()
    {
        Ok(out) => out,
        Err(e) => {
            eprintln!("skipping: no C compiler ({e})");
            return;
        }
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

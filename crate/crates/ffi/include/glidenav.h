#ifndef GLIDENAV_H
#define GLIDENAV_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GnStatus {
  GN_STATUS_OK = 0,
  GN_STATUS_NULL_POINTER = 1,
  GN_STATUS_INVALID_ARGUMENT = 2,
  GN_STATUS_IO = 3,
  GN_STATUS_MALFORMED_FILE = 4,
  GN_STATUS_OUT_OF_DOMAIN = 5,
  GN_STATUS_STALLED = 6,
  GN_STATUS_NO_FEASIBLE_ACTION = 7,
  GN_STATUS_ALREADY_AT_GOAL = 8,
  GN_STATUS_BUFFER_TOO_SMALL = 9,
  GN_STATUS_PANIC = 10,
} GnStatus;

// Forecast, bathymetry, simulator parameters and flight speeds.
typedef struct GnEnvironment GnEnvironment;

// Dive controls. Flown with the environment's flight speeds.
typedef struct GnControls {
  uint32_t n_yos;
  double z_bottom;
  double z_top;
  double theta_dive;
  double theta_climb;
  double chi;
} GnControls;

typedef struct GnPlannerOptions {
  uint64_t n_trials;
  // Number of voting trees.
  uint32_t n_threads;
  uint32_t max_depth;
} GnPlannerOptions;

typedef struct GnSimParams {
  double drag_i;
  double drag_j;
  double curr_mag;
  double curr_dir;
  double curr_min;
  double motion_mag;
  double motion_dir;
  double motion_min;
} GnSimParams;

typedef struct GnSurfaceState {
  double lon;
  double lat;
  // Seconds.
  double time;
} GnSurfaceState;

typedef struct GnPosition {
  double lon;
  double lat;
} GnPosition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *gn_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *gn_version(void);

// Default dive controls: 5 yos between 0 and 95 m.
struct GnControls gn_controls_default(void);

struct GnPlannerOptions gn_planner_options_default(void);

// Loads a current field and bathymetry from grid files. Simulator noise
// starts at zero and flight speeds at their defaults.
//
// # Safety
// `field_path` and `bathy_path` must be NUL-terminated strings and `out`
// a valid pointer.
enum GnStatus gn_environment_load(const char *field_path,
                                  const char *bathy_path,
                                  struct GnEnvironment **out);

// # Safety
// `env` must come from [`gn_environment_load`] and not be used afterwards.
// Null is ignored.
void gn_environment_free(struct GnEnvironment *env);

// # Safety
// `env` and `params` must be valid pointers.
enum GnStatus gn_environment_set_params(struct GnEnvironment *env,
                                        const struct GnSimParams *params);

// Sets the horizontal speed and depth rate (m/s) used for every dive.
//
// # Safety
// `env` must be a valid pointer.
enum GnStatus gn_environment_set_flight_speeds(struct GnEnvironment *env,
                                               double horizontal,
                                               double depth_rate);

// Simulates one dive flown at relative bearing `alpha` to goal bearing
// `beta` (degrees). The same seed gives the same surfacing.
//
// # Safety
// All pointers must be valid.
enum GnStatus gn_simulate_dive(const struct GnEnvironment *env,
                               const struct GnSurfaceState *start,
                               double alpha,
                               double beta,
                               const struct GnControls *controls_in,
                               uint64_t seed,
                               struct GnSurfaceState *out);

// Plans the next dive toward `goal` and writes the chosen relative bearing
// to `alpha_out`. Candidate bearings are -40, -20, 0, 20 and 40 degrees.
//
// # Safety
// All pointers must be valid.
enum GnStatus gn_plan_next_dive(const struct GnEnvironment *env,
                                const struct GnSurfaceState *start,
                                struct GnPosition goal,
                                double rho,
                                const struct GnControls *controls_in,
                                const struct GnPlannerOptions *options,
                                uint64_t seed,
                                double *alpha_out);

// Builds the waypoint list for relative bearing `alpha` from `p0`. At most
// `n_bck + 1` positions are written to `out`; `len_out` receives the count.
// Distances are in meters.
//
// # Safety
// `out` must point to `capacity` writable positions and `len_out` must be
// valid.
enum GnStatus gn_waypoints(double alpha,
                           struct GnPosition p0,
                           struct GnPosition goal_curr,
                           struct GnPosition goal_next,
                           double rho,
                           double rho_wpt,
                           uintptr_t n_bck,
                           struct GnPosition *out,
                           uintptr_t capacity,
                           uintptr_t *len_out);

// Great-circle distance in meters; NaN for invalid positions.
double gn_geodesic_distance(struct GnPosition a, struct GnPosition b);

// Initial bearing from `a` to `b` in degrees from north.
//
// # Safety
// `out` must be a valid pointer.
enum GnStatus gn_bearing(struct GnPosition a, struct GnPosition b, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GLIDENAV_H */

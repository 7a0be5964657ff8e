//! Converts a planned relative bearing into an ordered waypoint list with
//! straight-to-goal backup waypoints, so the glider keeps making sensible
//! progress if the next plan never reaches it.

use serde::{Deserialize, Serialize};

use crate::geo::{bearing, geodesic_distance, heading_from_action, point_on_heading, GeoPosition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WaypointList(pub Vec<GeoPosition>);

impl WaypointList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<GeoPosition> {
        self.0.first().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GeoPosition> {
        self.0.iter()
    }
}

/// Waypoint spacing and count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaypointParams {
    /// Goal radius (m).
    pub rho: f64,
    /// Distance between consecutive waypoints (m).
    pub rho_wpt: f64,
    /// Number of backup waypoints.
    pub n_bck: usize,
}

/// Builds the waypoint list for bearing `alpha` from `p0`.
///
/// The first waypoint follows the planned heading for up to `rho_wpt`, or is
/// the current goal itself once within `rho_wpt / 2` of it. Backups then step
/// straight toward the current goal and afterwards the next goal.
pub fn to_wpt_list(
    alpha: f64,
    p0: GeoPosition,
    goal_curr: GeoPosition,
    goal_next: GeoPosition,
    params: WaypointParams,
) -> WaypointList {
    let mut wpts = Vec::with_capacity(params.n_bck + 1);
    let goal_d = geodesic_distance(p0, goal_curr);
    if goal_d < params.rho_wpt / 2.0 {
        wpts.push(goal_curr);
    } else {
        let beta = bearing(p0, goal_curr).expect("p0 is at least rho_wpt / 2 from the goal");
        let psi = heading_from_action(alpha, beta);
        wpts.push(point_on_heading(p0, psi, goal_d.min(params.rho_wpt)));
    }
    add_backup_wpts(&mut wpts, goal_curr, params);
    add_backup_wpts(&mut wpts, goal_next, params);
    WaypointList(wpts)
}

fn add_backup_wpts(wpts: &mut Vec<GeoPosition>, goal: GeoPosition, params: WaypointParams) {
    while wpts.len() <= params.n_bck {
        let p = *wpts.last().expect("list starts non-empty");
        let d = geodesic_distance(p, goal);
        if d < params.rho {
            break;
        }
        let wpt = if overshoots_goal(d, params) {
            goal
        } else {
            let beta = bearing(p, goal).expect("p is at least rho from the goal");
            point_on_heading(p, beta, params.rho_wpt)
        };
        wpts.push(wpt);
    }
}

/// A full `rho_wpt` step from distance `d` would pass the goal center or
/// land beyond the far edge of the goal region.
fn overshoots_goal(d: f64, params: WaypointParams) -> bool {
    d < params.rho_wpt + params.rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::angle_diff_deg;
    use proptest::prelude::*;

    const STANDARD: WaypointParams = WaypointParams { rho: 2_000.0, rho_wpt: 7_000.0, n_bck: 2 };

    fn origin() -> GeoPosition {
        GeoPosition { lon: -1.0, lat: 57.0 }
    }

    #[test]
    fn near_goal_uses_goal_as_first_waypoint() {
        let p0 = origin();
        let goal = point_on_heading(p0, 90.0, 2_000.0);
        let next = point_on_heading(p0, 270.0, 15_000.0);
        let w = to_wpt_list(20.0, p0, goal, next, STANDARD);
        assert_eq!(w.0[0], goal);
        assert!(w.len() <= 3);
    }

    #[test]
    fn overshooting_backup_becomes_goal() {
        let p0 = origin();
        let goal = point_on_heading(p0, 90.0, 10_000.0);
        let next = point_on_heading(goal, 0.0, 15_000.0);
        let w = to_wpt_list(-30.0, p0, goal, next, STANDARD);
        assert_eq!(w.len(), 3);
        // planned waypoint 30 degrees clockwise of the goal bearing at rho_wpt
        assert!(angle_diff_deg(bearing(p0, w.0[0]).unwrap(), 120.0) < 0.1);
        assert!((geodesic_distance(p0, w.0[0]) - 7_000.0).abs() < 1.0);
        // the goal would be overshot, so it replaces the first backup
        assert_eq!(w.0[1], goal);
        // the second backup heads for the next goal
        assert!(angle_diff_deg(bearing(goal, w.0[2]).unwrap(), bearing(goal, next).unwrap()) < 0.1);
        assert!((geodesic_distance(goal, w.0[2]) - 7_000.0).abs() < 1.0);
    }

    #[test]
    fn inside_both_goals_yields_single_waypoint() {
        let p0 = origin();
        let goal = point_on_heading(p0, 10.0, 500.0);
        let next = point_on_heading(p0, 200.0, 800.0);
        let w = to_wpt_list(0.0, p0, goal, next, STANDARD);
        assert_eq!(w.0, vec![goal]);
    }

    #[test]
    fn far_goal_fills_backups_toward_current_goal() {
        let p0 = origin();
        let goal = point_on_heading(p0, 45.0, 40_000.0);
        let next = point_on_heading(goal, 45.0, 40_000.0);
        let w = to_wpt_list(0.0, p0, goal, next, STANDARD);
        assert_eq!(w.len(), 3);
        for pair in w.0.windows(2) {
            assert!((geodesic_distance(pair[0], pair[1]) - 7_000.0).abs() < 1.0);
        }
        assert!(angle_diff_deg(bearing(p0, w.0[0]).unwrap(), bearing(p0, goal).unwrap()) < 0.1);
    }

    proptest! {
        #[test]
        fn list_properties(
            alpha in prop::sample::select(vec![-40.0, -20.0, 0.0, 20.0, 40.0]),
            b1 in 0.0f64..360.0, d1 in 0.0f64..60_000.0,
            b2 in 0.0f64..360.0, d2 in 3_000.0f64..60_000.0,
            n_bck in 0usize..6,
        ) {
            let p0 = origin();
            let goal = point_on_heading(p0, b1, d1);
            let next = point_on_heading(goal, b2, d2);
            let params = WaypointParams { n_bck, ..STANDARD };
            let w = to_wpt_list(alpha, p0, goal, next, params);
            prop_assert!(!w.is_empty() && w.len() <= n_bck + 1);
            for pair in w.0.windows(2) {
                prop_assert!(geodesic_distance(pair[0], pair[1]) > 0.0);
            }
            // backups strictly approach their goal
            let mut target = goal;
            for pair in w.0.windows(2) {
                if geodesic_distance(pair[0], goal) < params.rho {
                    target = next;
                }
                prop_assert!(geodesic_distance(pair[1], target) < geodesic_distance(pair[0], target));
            }
            if alpha == 0.0 && d1 >= params.rho_wpt / 2.0 {
                prop_assert!(angle_diff_deg(bearing(p0, w.0[0]).unwrap(), bearing(p0, goal).unwrap()) < 0.1);
            }
        }
    }
}

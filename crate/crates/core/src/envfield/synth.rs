//! Analytic current fields and bathymetry for tests, demos and desk-scale
//! experiments. Each cell holds the analytic value at the cell center.

use serde::{Deserialize, Serialize};

use super::{Axis, Bathymetry, CurrentField, EnvError};
use crate::geo::{GeoPosition, LocalFrame};

/// Cell edges for all four dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lon_edges: Vec<f64>,
    pub lat_edges: Vec<f64>,
    pub depth_edges: Vec<f64>,
    pub time_edges: Vec<f64>,
}

impl GridSpec {
    /// Regular lon/lat/time grid with the given depth edges.
    #[allow(clippy::too_many_arguments)]
    pub fn regular(
        lon: (f64, f64),
        n_lon: usize,
        lat: (f64, f64),
        n_lat: usize,
        depth_edges: Vec<f64>,
        time: (f64, f64),
        n_time: usize,
    ) -> Result<Self, EnvError> {
        Ok(GridSpec {
            lon_edges: Axis::regular(lon.0, lon.1, n_lon)?.edges().to_vec(),
            lat_edges: Axis::regular(lat.0, lat.1, n_lat)?.edges().to_vec(),
            depth_edges,
            time_edges: Axis::regular(time.0, time.1, n_time)?.edges().to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    /// Constant `(u, v)` everywhere.
    Uniform { u: f64, v: f64 },
    /// Spatially uniform oscillation `A sin(2 pi t / P + phase)` along
    /// `direction` (compass degrees the flow sets toward).
    Tidal { amplitude: f64, period: f64, phase: f64, direction: f64 },
    /// Solid-body rotation about `center` at `omega` rad/s (positive is
    /// counter-clockwise seen from above).
    Gyre { center: GeoPosition, omega: f64 },
}

pub fn synth_field(kind: &FieldKind, grid: &GridSpec) -> Result<CurrentField, EnvError> {
    let lon = Axis::new(grid.lon_edges.clone())?;
    let lat = Axis::new(grid.lat_edges.clone())?;
    let depth = Axis::new(grid.depth_edges.clone())?;
    let time = Axis::new(grid.time_edges.clone())?;
    let n = lon.cells() * lat.cells() * depth.cells() * time.cells();
    let mut u = vec![0f32; n];
    let mut v = vec![0f32; n];

    match *kind {
        FieldKind::Uniform { u: cu, v: cv } => {
            if !(cu.is_finite() && cv.is_finite()) {
                return Err(EnvError::InvalidParams("non-finite uniform current".into()));
            }
            u.fill(cu as f32);
            v.fill(cv as f32);
        }
        FieldKind::Tidal { amplitude, period, phase, direction } => {
            if !(period > 0.0 && period.is_finite()) {
                return Err(EnvError::InvalidParams(format!("tidal period must be positive, got {period}")));
            }
            let (se, ce) = direction.to_radians().sin_cos();
            let per_time = n / time.cells();
            for it in 0..time.cells() {
                let t = time.center(it);
                let a = amplitude * (std::f64::consts::TAU * t / period + phase).sin();
                let start = it * per_time;
                u[start..start + per_time].fill((a * se) as f32);
                v[start..start + per_time].fill((a * ce) as f32);
            }
        }
        FieldKind::Gyre { center, omega } => {
            if !omega.is_finite() || !center.is_valid() {
                return Err(EnvError::InvalidParams("invalid gyre parameters".into()));
            }
            let frame = LocalFrame::new(center);
            let plane = lat.cells() * lon.cells();
            let mut layer_u = vec![0f32; plane];
            let mut layer_v = vec![0f32; plane];
            for j in 0..lat.cells() {
                for i in 0..lon.cells() {
                    let p = GeoPosition { lon: lon.center(i), lat: lat.center(j) };
                    let [x, y] = frame.project(p);
                    layer_u[j * lon.cells() + i] = (-omega * y) as f32;
                    layer_v[j * lon.cells() + i] = (omega * x) as f32;
                }
            }
            for chunk in 0..n / plane {
                u[chunk * plane..(chunk + 1) * plane].copy_from_slice(&layer_u);
                v[chunk * plane..(chunk + 1) * plane].copy_from_slice(&layer_v);
            }
        }
    }
    CurrentField::new(lon, lat, depth, time, u, v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BathyKind {
    Flat {
        depth: f64,
    },
    /// `west` depth for longitudes below `split_lon`, `east` otherwise.
    Step {
        split_lon: f64,
        west: f64,
        east: f64,
    },
}

pub fn synth_bathy(kind: &BathyKind, lon_edges: &[f64], lat_edges: &[f64]) -> Result<Bathymetry, EnvError> {
    let lon = Axis::new(lon_edges.to_vec())?;
    let lat = Axis::new(lat_edges.to_vec())?;
    let mut floor = Vec::with_capacity(lon.cells() * lat.cells());
    for _ in 0..lat.cells() {
        for i in 0..lon.cells() {
            let d = match *kind {
                BathyKind::Flat { depth } => depth,
                BathyKind::Step { split_lon, west, east } => {
                    if lon.center(i) < split_lon {
                        west
                    } else {
                        east
                    }
                }
            };
            if !(d > 0.0) {
                return Err(EnvError::InvalidParams(format!("floor depth must be positive, got {d}")));
            }
            floor.push(d as f32);
        }
    }
    Bathymetry::new(lon, lat, floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divesim::InternalState;

    fn grid() -> GridSpec {
        GridSpec::regular((-1.0, 1.0), 20, (54.0, 56.0), 20, vec![0.0, 50.0, 200.0], (0.0, 86_400.0), 24).unwrap()
    }

    fn at(lon: f64, lat: f64, time: f64) -> InternalState {
        InternalState { position: GeoPosition { lon, lat }, depth: 10.0, time }
    }

    #[test]
    fn zero_uniform_field() {
        let f = synth_field(&FieldKind::Uniform { u: 0.0, v: 0.0 }, &grid()).unwrap();
        assert!(f.u().iter().chain(f.v()).all(|x| *x == 0.0));
        assert_eq!(f.lookup_current(&at(0.3, 55.2, 1000.0)).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn tidal_peaks_at_quarter_period() {
        let period = 44_700.0;
        let g = GridSpec::regular((-1.0, 1.0), 2, (54.0, 56.0), 2, vec![0.0, 200.0], (0.0, 86_400.0), 86_400 / 600)
            .unwrap();
        let f = synth_field(&FieldKind::Tidal { amplitude: 0.3, period, phase: 0.0, direction: 90.0 }, &g).unwrap();
        let (u, v) = f.lookup_current(&at(0.0, 55.0, period / 4.0)).unwrap();
        assert!((u - 0.3).abs() < 0.005, "{u}");
        assert!(v.abs() < 1e-6);
        assert!(synth_field(&FieldKind::Tidal { amplitude: 0.3, period: 0.0, phase: 0.0, direction: 0.0 }, &g).is_err());
    }

    #[test]
    fn gyre_is_antisymmetric_about_center() {
        let center = GeoPosition { lon: 0.0, lat: 55.0 };
        let f = synth_field(&FieldKind::Gyre { center, omega: 1e-5 }, &grid()).unwrap();
        // cell centers symmetric about the gyre center
        let (u1, v1) = f.lookup_current(&at(0.55, 55.35, 0.0)).unwrap();
        let (u2, v2) = f.lookup_current(&at(-0.55, 54.65, 0.0)).unwrap();
        assert!((u1 + u2).abs() < 1e-6 && (v1 + v2).abs() < 1e-6);
        assert!(u1.hypot(v1) > 0.1);
        // counter-clockwise: north of center flows west
        assert!(u1 < 0.0);
    }

    #[test]
    fn flat_and_step_bathymetry() {
        let g = grid();
        let b = synth_bathy(&BathyKind::Flat { depth: 95.0 }, &g.lon_edges, &g.lat_edges).unwrap();
        assert_eq!(b.lookup_bathy(GeoPosition { lon: 0.42, lat: 55.9 }).unwrap(), 95.0);
        let b = synth_bathy(&BathyKind::Step { split_lon: 0.0, west: 80.0, east: 120.0 }, &g.lon_edges, &g.lat_edges)
            .unwrap();
        assert_eq!(b.lookup_bathy(GeoPosition { lon: -0.5, lat: 55.0 }).unwrap(), 80.0);
        assert_eq!(b.lookup_bathy(GeoPosition { lon: 0.5, lat: 55.0 }).unwrap(), 120.0);
        assert!(synth_bathy(&BathyKind::Flat { depth: 0.0 }, &g.lon_edges, &g.lat_edges).is_err());
    }
}

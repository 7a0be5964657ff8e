use super::EnvError;
use crate::divesim::InternalState;
use crate::geo::{meters_per_deg_lon, GeoPosition, METERS_PER_DEG_LAT};

/// Components below this magnitude never reach a cell edge.
const STALL_SPEED: f64 = 1e-9;

/// Strictly increasing cell edges along one grid dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    edges: Vec<f64>,
}

impl Axis {
    pub fn new(edges: Vec<f64>) -> Result<Self, EnvError> {
        if edges.len() < 2 {
            return Err(EnvError::InvalidGrid("axis needs at least two edges".into()));
        }
        if let Some(i) = edges.iter().position(|e| !e.is_finite()) {
            return Err(EnvError::InvalidGrid(format!("edge {i} is not finite")));
        }
        if let Some(i) = edges.windows(2).position(|w| w[1] <= w[0]) {
            return Err(EnvError::InvalidGrid(format!("edges not strictly increasing at index {}", i + 1)));
        }
        Ok(Axis { edges })
    }

    /// Evenly spaced edges spanning `[start, end]` with `cells` cells.
    pub fn regular(start: f64, end: f64, cells: usize) -> Result<Self, EnvError> {
        if cells == 0 || end <= start {
            return Err(EnvError::InvalidGrid(format!("empty axis [{start}, {end}] / {cells}")));
        }
        let step = (end - start) / cells as f64;
        let mut edges: Vec<f64> = (0..cells).map(|i| start + step * i as f64).collect();
        edges.push(end);
        Axis::new(edges)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn cells(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.edges[0]
    }

    pub fn end(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    /// Index of the half-open cell containing `x`.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x >= self.start() && x < self.end()) {
            return None;
        }
        // first edge strictly greater than x, minus one
        Some(self.edges.partition_point(|&e| e <= x) - 1)
    }

    pub fn bounds(&self, cell: usize) -> (f64, f64) {
        (self.edges[cell], self.edges[cell + 1])
    }

    pub fn center(&self, cell: usize) -> f64 {
        0.5 * (self.edges[cell] + self.edges[cell + 1])
    }
}

/// Indices of one forecast cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellRef {
    pub i_lon: usize,
    pub i_lat: usize,
    pub i_depth: usize,
    pub i_time: usize,
}

/// Glider velocity over ground: east and north in m/s, and the depth rate in
/// m/s (positive while descending).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Velocity {
    pub east: f64,
    pub north: f64,
    pub down: f64,
}

/// Horizontal current forecast on a lon/lat/depth/time grid.
///
/// Values are stored row-major in `(time, depth, lat, lon)` order. The
/// vertical component is zero everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentField {
    lon: Axis,
    lat: Axis,
    depth: Axis,
    time: Axis,
    u: Vec<f32>,
    v: Vec<f32>,
}

fn out_of_domain(what: &'static str, value: f64, axis: &Axis) -> EnvError {
    EnvError::OutOfDomain { what, detail: format!("{value} not in [{}, {})", axis.start(), axis.end()) }
}

impl CurrentField {
    pub fn new(lon: Axis, lat: Axis, depth: Axis, time: Axis, u: Vec<f32>, v: Vec<f32>) -> Result<Self, EnvError> {
        let n = lon.cells() * lat.cells() * depth.cells() * time.cells();
        if u.len() != n || v.len() != n {
            return Err(EnvError::InvalidGrid(format!(
                "expected {n} values per component, got u={} v={}",
                u.len(),
                v.len()
            )));
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(EnvError::InvalidGrid("non-finite velocity".into()));
        }
        if depth.start() > 0.0 {
            return Err(EnvError::InvalidGrid("depth axis must include the surface".into()));
        }
        Ok(CurrentField { lon, lat, depth, time, u, v })
    }

    pub fn lon_axis(&self) -> &Axis {
        &self.lon
    }
    pub fn lat_axis(&self) -> &Axis {
        &self.lat
    }
    pub fn depth_axis(&self) -> &Axis {
        &self.depth
    }
    pub fn time_axis(&self) -> &Axis {
        &self.time
    }
    pub fn u(&self) -> &[f32] {
        &self.u
    }
    pub fn v(&self) -> &[f32] {
        &self.v
    }

    /// Number of cells along (time, depth, lat, lon).
    pub fn shape(&self) -> [usize; 4] {
        [self.time.cells(), self.depth.cells(), self.lat.cells(), self.lon.cells()]
    }

    pub fn index(&self, c: CellRef) -> usize {
        ((c.i_time * self.depth.cells() + c.i_depth) * self.lat.cells() + c.i_lat) * self.lon.cells() + c.i_lon
    }

    pub fn contains_position(&self, p: GeoPosition) -> bool {
        self.lon.locate(p.lon).is_some() && self.lat.locate(p.lat).is_some()
    }

    pub fn locate(&self, g: &InternalState) -> Result<CellRef, EnvError> {
        let p = g.position;
        Ok(CellRef {
            i_lon: self.lon.locate(p.lon).ok_or_else(|| out_of_domain("longitude", p.lon, &self.lon))?,
            i_lat: self.lat.locate(p.lat).ok_or_else(|| out_of_domain("latitude", p.lat, &self.lat))?,
            i_depth: self.depth.locate(g.depth).ok_or_else(|| out_of_domain("depth", g.depth, &self.depth))?,
            i_time: self.time.locate(g.time).ok_or_else(|| out_of_domain("time", g.time, &self.time))?,
        })
    }

    pub fn value(&self, c: CellRef) -> (f64, f64) {
        let i = self.index(c);
        (self.u[i] as f64, self.v[i] as f64)
    }

    /// `(u, v)` of the cell containing `g`.
    pub fn lookup_current(&self, g: &InternalState) -> Result<(f64, f64), EnvError> {
        Ok(self.value(self.locate(g)?))
    }

    /// Time until a straight-line trajectory from `g` at `vel` leaves its
    /// current cell or reaches the depth limit `z_lim`, whichever comes first.
    pub fn time_to_cell_exit(&self, g: &InternalState, vel: Velocity, z_lim: f64) -> Result<f64, EnvError> {
        let cell = self.locate(g)?;
        self.time_to_exit_from(cell, g, vel, z_lim)
    }

    pub(crate) fn time_to_exit_from(
        &self,
        cell: CellRef,
        g: &InternalState,
        vel: Velocity,
        z_lim: f64,
    ) -> Result<f64, EnvError> {
        if vel.east.abs() < STALL_SPEED && vel.north.abs() < STALL_SPEED && vel.down.abs() < STALL_SPEED {
            return Err(EnvError::Stalled);
        }
        let p = g.position;
        let (t0, t1) = self.time.bounds(cell.i_time);
        debug_assert!(g.time >= t0);
        let mut dt = t1 - g.time;

        let deg_lon_rate = vel.east / meters_per_deg_lon(p.lat);
        dt = dt.min(axis_exit(&self.lon, cell.i_lon, p.lon, deg_lon_rate));
        let deg_lat_rate = vel.north / METERS_PER_DEG_LAT;
        dt = dt.min(axis_exit(&self.lat, cell.i_lat, p.lat, deg_lat_rate));
        dt = dt.min(axis_exit(&self.depth, cell.i_depth, g.depth, vel.down));
        let toward_limit =
            (vel.down > STALL_SPEED && z_lim >= g.depth) || (vel.down < -STALL_SPEED && z_lim <= g.depth);
        if toward_limit {
            dt = dt.min((z_lim - g.depth) / vel.down);
        }
        Ok(dt.max(0.0))
    }
}

/// Time for coordinate `x` moving at `rate` to reach the edge of `cell`.
fn axis_exit(axis: &Axis, cell: usize, x: f64, rate: f64) -> f64 {
    let (lo, hi) = axis.bounds(cell);
    if rate > STALL_SPEED * 1e-6 {
        (hi - x) / rate
    } else if rate < -STALL_SPEED * 1e-6 {
        (lo - x) / rate
    } else {
        f64::INFINITY
    }
}

/// Seafloor depth (m, positive down) on a lon/lat grid, row-major `(lat, lon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bathymetry {
    lon: Axis,
    lat: Axis,
    floor: Vec<f32>,
}

impl Bathymetry {
    pub fn new(lon: Axis, lat: Axis, floor: Vec<f32>) -> Result<Self, EnvError> {
        let n = lon.cells() * lat.cells();
        if floor.len() != n {
            return Err(EnvError::InvalidGrid(format!("expected {n} depths, got {}", floor.len())));
        }
        if let Some(i) = floor.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(EnvError::InvalidGrid(format!("floor depth at index {i} must be positive")));
        }
        Ok(Bathymetry { lon, lat, floor })
    }

    pub fn lon_axis(&self) -> &Axis {
        &self.lon
    }
    pub fn lat_axis(&self) -> &Axis {
        &self.lat
    }
    pub fn floor_depth(&self) -> &[f32] {
        &self.floor
    }

    fn locate(&self, p: GeoPosition) -> Result<(usize, usize), EnvError> {
        Ok((
            self.lon.locate(p.lon).ok_or_else(|| out_of_domain("longitude", p.lon, &self.lon))?,
            self.lat.locate(p.lat).ok_or_else(|| out_of_domain("latitude", p.lat, &self.lat))?,
        ))
    }

    pub fn lookup_bathy(&self, p: GeoPosition) -> Result<f64, EnvError> {
        let (i, j) = self.locate(p)?;
        Ok(self.floor[j * self.lon.cells() + i] as f64)
    }

    /// Time until horizontal motion from `p` crosses a bathymetry cell edge.
    pub fn time_to_cell_exit(&self, p: GeoPosition, east: f64, north: f64) -> Result<f64, EnvError> {
        let (i, j) = self.locate(p)?;
        let a = axis_exit(&self.lon, i, p.lon, east / meters_per_deg_lon(p.lat));
        let b = axis_exit(&self.lat, j, p.lat, north / METERS_PER_DEG_LAT);
        Ok(a.min(b).max(0.0))
    }
}

//! Spherical-earth geodesy: distances, bearings, destination points and a
//! local east/north tangent plane.
//!
//! Bearings and headings use the compass convention: degrees clockwise from
//! true north in `[0, 360)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean earth radius (m).
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Meters spanned by one degree of latitude on the sphere.
pub const METERS_PER_DEG_LAT: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

/// Separations below this (m) are treated as coincident.
const COINCIDENT_M: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeoError {
    #[error("position out of range: lon={lon}, lat={lat}")]
    InvalidPosition { lon: f64, lat: f64 },
    #[error("bearing undefined between coincident points")]
    CoincidentPoints,
}

/// A point on the earth's surface in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPosition {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPosition {
    /// Builds a validated position.
    pub fn new(lon: f64, lat: f64) -> Result<Self, GeoError> {
        let p = GeoPosition { lon, lat };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(GeoError::InvalidPosition { lon, lat })
        }
    }

    pub fn is_valid(&self) -> bool {
        self.lon.is_finite()
            && self.lat.is_finite()
            && (-180.0..=180.0).contains(&self.lon)
            && (-90.0..=90.0).contains(&self.lat)
    }
}

/// Surfaced glider state: where and when the glider is at the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceState {
    pub position: GeoPosition,
    /// Seconds on the mission clock.
    pub time: f64,
}

impl SurfaceState {
    pub fn new(position: GeoPosition, time: f64) -> Self {
        SurfaceState { position, time }
    }
}

/// Wraps an angle in degrees into `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid can return 360.0 for tiny negative inputs
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Absolute angular difference in `[0, 180]`.
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let d = normalize_deg(a - b);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Great-circle distance in meters (haversine).
pub fn geodesic_distance(a: GeoPosition, b: GeoPosition) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Initial great-circle bearing from `from` to `to`.
pub fn bearing(from: GeoPosition, to: GeoPosition) -> Result<f64, GeoError> {
    if geodesic_distance(from, to) < COINCIDENT_M {
        return Err(GeoError::CoincidentPoints);
    }
    let (phi1, phi2) = (from.lat.to_radians(), to.lat.to_radians());
    let dlambda = (to.lon - from.lon).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    Ok(normalize_deg(y.atan2(x).to_degrees()))
}

/// Commanded heading for relative bearing `alpha` given goal bearing `beta`.
///
/// Follows `alpha = beta - psi`, so `psi = beta - alpha`. A positive `alpha`
/// therefore turns the heading counter-clockwise of the goal bearing.
pub fn heading_from_action(alpha: f64, beta: f64) -> f64 {
    normalize_deg(beta - alpha)
}

/// Destination reached travelling `dist` meters from `p` along initial
/// bearing `psi`.
pub fn point_on_heading(p: GeoPosition, psi: f64, dist: f64) -> GeoPosition {
    if dist == 0.0 {
        return p;
    }
    let delta = dist / EARTH_RADIUS_M;
    let theta = psi.to_radians();
    let phi1 = p.lat.to_radians();
    let lambda1 = p.lon.to_radians();
    let sin_phi2 = phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos();
    let phi2 = sin_phi2.clamp(-1.0, 1.0).asin();
    let y = theta.sin() * delta.sin() * phi1.cos();
    let x = delta.cos() - phi1.sin() * sin_phi2;
    let lambda2 = lambda1 + y.atan2(x);
    let mut lon = lambda2.to_degrees();
    lon = (lon + 180.0).rem_euclid(360.0) - 180.0;
    GeoPosition { lon, lat: phi2.to_degrees() }
}

/// Meters per degree of longitude at latitude `lat`.
pub fn meters_per_deg_lon(lat: f64) -> f64 {
    METERS_PER_DEG_LAT * lat.to_radians().cos()
}

/// Equirectangular east/north projection anchored at `origin`.
///
/// Accurate to well under a meter over the tens of kilometres a single dive
/// or transect spans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: GeoPosition,
    m_per_deg_lon: f64,
}

impl LocalFrame {
    pub fn new(origin: GeoPosition) -> Self {
        LocalFrame { origin, m_per_deg_lon: meters_per_deg_lon(origin.lat) }
    }

    /// `(east, north)` in meters.
    pub fn project(&self, p: GeoPosition) -> [f64; 2] {
        let mut dlon = p.lon - self.origin.lon;
        if dlon > 180.0 {
            dlon -= 360.0;
        } else if dlon < -180.0 {
            dlon += 360.0;
        }
        [dlon * self.m_per_deg_lon, (p.lat - self.origin.lat) * METERS_PER_DEG_LAT]
    }

    pub fn unproject(&self, xy: [f64; 2]) -> GeoPosition {
        GeoPosition {
            lon: self.origin.lon + xy[0] / self.m_per_deg_lon,
            lat: self.origin.lat + xy[1] / METERS_PER_DEG_LAT,
        }
    }
}

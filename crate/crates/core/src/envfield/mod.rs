//! Gridded ocean-current forecasts and bathymetry.
//!
//! Both grids are piecewise constant: every value belongs to a cell bounded
//! by consecutive axis edges, and cells are half-open `[edge_i, edge_{i+1})`
//! on every axis.

mod grid;
mod ogf;
mod synth;

pub use grid::{Axis, Bathymetry, CellRef, CurrentField, Velocity};
pub use ogf::{load_bathy, load_field, read_bathy, read_field, save_bathy, save_field, write_bathy, write_field};
pub use synth::{synth_bathy, synth_field, BathyKind, FieldKind, GridSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("{what} outside grid domain ({detail})")]
    OutOfDomain { what: &'static str, detail: String },
    #[error("velocity too small to leave the current cell")]
    Stalled,
    #[error("malformed grid file at {location}: {message}")]
    MalformedFile { location: String, message: String },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid synthetic field parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

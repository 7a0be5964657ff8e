// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod config;
pub mod divesim;
pub mod envfield;
pub mod geo;
pub mod harness;
pub mod mission;
pub mod navplan;
pub mod planner;
pub mod plot;
pub mod seed;
pub mod service;

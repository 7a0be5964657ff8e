use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ControlParams, SimError};

/// Steady-state through-water speeds for one instruction set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightSpeeds {
    /// Horizontal speed through water (m/s).
    pub horizontal: f64,
    /// Depth rate (m/s), the same magnitude on descent and ascent.
    pub depth_rate: f64,
}

impl FlightSpeeds {
    pub const DEFAULT: FlightSpeeds = FlightSpeeds { horizontal: 0.30, depth_rate: 0.10 };

    fn validate(self, name: &str) -> Result<Self, SimError> {
        if self.horizontal > 0.0 && self.depth_rate > 0.0 && self.horizontal.is_finite() && self.depth_rate.is_finite()
        {
            Ok(self)
        } else {
            Err(SimError::InvalidInput(format!("flight profile {name:?} needs positive finite speeds")))
        }
    }
}

impl Default for FlightSpeeds {
    fn default() -> Self {
        FlightSpeeds::DEFAULT
    }
}

/// Maps control parameters to steady-state glider speeds.
pub trait FlightModel: Send + Sync {
    fn flight_speeds(&self, controls: &ControlParams) -> Result<FlightSpeeds, SimError>;
}

/// Constant speeds per named instruction set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlightTable {
    #[serde(default)]
    pub default: FlightSpeeds,
    #[serde(default)]
    pub profiles: BTreeMap<String, FlightSpeeds>,
}

impl FlightTable {
    pub fn constant(speeds: FlightSpeeds) -> Self {
        FlightTable { default: speeds, profiles: BTreeMap::new() }
    }

    pub fn with_profile(mut self, name: impl Into<String>, speeds: FlightSpeeds) -> Self {
        self.profiles.insert(name.into(), speeds);
        self
    }
}

impl FlightModel for FlightTable {
    fn flight_speeds(&self, controls: &ControlParams) -> Result<FlightSpeeds, SimError> {
        let name = controls.instruction_set.as_str();
        if let Some(s) = self.profiles.get(name) {
            return s.validate(name);
        }
        if name.is_empty() || name == ControlParams::DEFAULT_INSTRUCTION_SET {
            return self.default.validate(name);
        }
        Err(SimError::UnknownInstructionSet(name.to_string()))
    }
}

//! Cell parameters, the diffusion and thermal models, their discretization
//! and the voltage/heat output maps.

mod discretize;
mod ocp;
mod output;
mod params;
mod soc;

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use discretize::{
    build_electrochemical, build_state_space, build_thermal, electrochemical_generator,
    thermal_generator, Electrochemical, StateSpace, Thermal,
};
pub use ocp::OcpMap;
pub use output::{
    heat_generation, linearize_voltage, open_circuit_voltage, open_circuit_voltage_saturated,
    overpotential, stoichiometry_excursion, surface_stoichiometry, terminal_voltage,
    voltage_current_slope, Linearization,
};
pub use params::{CellParams, SCALAR_KEYS};
pub use soc::{
    average_temperature, charge_rate, mass_weights, mean_stoichiometry, soc, stoichiometry_span,
    uniform_state_at_soc, volume_weights,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Electrode {
    Anode,
    Cathode,
}

impl fmt::Display for Electrode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Electrode::Anode => "anode",
            Electrode::Cathode => "cathode",
        })
    }
}

/// Concentration profile, temperature profile and time of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    /// Anode particle concentration per shell, centre first (mol/m³).
    pub z1: DVector<f64>,
    /// Temperature per radial shell, core first (K).
    pub z2: DVector<f64>,
    pub t: f64,
}

/// Temperature sanity envelope (K).
pub const TEMPERATURE_ENVELOPE: (f64, f64) = (200.0, 500.0);

impl PlantState {
    /// Uniform concentration at `soc` and uniform temperature `temp`.
    pub fn uniform(params: &CellParams, soc: f64, temp: f64) -> Self {
        Self {
            z1: uniform_state_at_soc(params, soc),
            z2: DVector::from_element(params.M, temp),
            t: 0.0,
        }
    }

    pub fn surface_concentration(&self) -> f64 {
        self.z1[self.z1.len() - 1]
    }

    pub fn surface_temperature(&self) -> f64 {
        self.z2[self.z2.len() - 1]
    }

    /// Describes the first envelope violation, if any.
    pub fn envelope_violation(&self, params: &CellParams) -> Option<String> {
        if self.z1.len() != params.N || self.z2.len() != params.M {
            return Some(format!(
                "state has {}+{} entries, parameters need {}+{}",
                self.z1.len(),
                self.z2.len(),
                params.N,
                params.M
            ));
        }
        if let Some((i, c)) = self
            .z1
            .iter()
            .enumerate()
            .find(|(_, c)| !(**c >= 0.0 && **c <= params.c_max_a))
        {
            return Some(format!(
                "concentration node {} = {c} outside [0, c_max_a]",
                i + 1
            ));
        }
        let (lo, hi) = TEMPERATURE_ENVELOPE;
        if let Some((j, t)) = self
            .z2
            .iter()
            .enumerate()
            .find(|(_, t)| !(**t >= lo && **t <= hi))
        {
            return Some(format!(
                "temperature node {} = {t} K outside [{lo}, {hi}]",
                j + 1
            ));
        }
        None
    }
}

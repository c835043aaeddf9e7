//! Detection observers for the voltage and temperature channels, their gain
//! design and Lyapunov verification.

mod design;
mod verify;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use design::{capped_spectrum, design_gain, ObserverDesign, ObserverGains, SpectrumChoice};
pub use verify::{
    closed_loop, covering_gamma_grid, gamma_grid, gamma_grid_from, gamma_sweep, ultimate_bound,
    verify_lyapunov, SweepReport, SweepRow, VerificationReport,
};

use crate::error::{Error, Result};
use crate::gpr::GpModel;
use crate::model::{
    average_temperature, open_circuit_voltage_saturated, terminal_voltage, uniform_state_at_soc,
    CellParams, StateSpace,
};
use crate::plant::{CycleRecord, Sample};

/// Estimates are internal signals and may overshoot physical ranges during
/// high-gain transients; only runaway growth counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e3;
pub const DIVERGENCE_TEMPERATURE: f64 = 1e5;

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub z1_hat: DVector<f64>,
    pub z2_hat: DVector<f64>,
    pub t: f64,
}

impl ObserverState {
    pub fn uniform(params: &CellParams, soc: f64, temp: f64) -> Self {
        Self {
            z1_hat: uniform_state_at_soc(params, soc),
            z2_hat: DVector::from_element(params.M, temp),
            t: 0.0,
        }
    }
}

/// Measured inputs and outputs at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub t: f64,
    pub current: f64,
    pub voltage: f64,
    pub temperature: f64,
}

impl From<&Sample> for Measurement {
    fn from(s: &Sample) -> Self {
        Self {
            t: s.t,
            current: s.current,
            voltage: s.v_meas,
            temperature: s.t_meas,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub t: f64,
    pub r_v: f64,
    pub r_t: f64,
}

/// How the voltage observer predicts its output.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// Linearization fixed at the design operating point.
    #[default]
    Fixed,
    /// Linearized afresh at every sample around the estimate, which equals
    /// the nonlinear voltage map evaluated at the estimate.
    Relinearized,
}

/// Voltage and temperature detection observers sharing one model.
#[derive(Debug, Clone)]
pub struct DetectionObserver<'a> {
    pub params: &'a CellParams,
    pub ss: &'a StateSpace,
    pub gain_v: DVector<f64>,
    pub gain_t: DVector<f64>,
    pub gp_v: Option<&'a GpModel>,
    pub gp_t: Option<&'a GpModel>,
    pub ambient: f64,
    pub output: OutputMode,
}

impl<'a> DetectionObserver<'a> {
    pub fn new(
        params: &'a CellParams,
        ss: &'a StateSpace,
        gains: &ObserverGains,
        ambient: f64,
    ) -> Self {
        Self {
            params,
            ss,
            gain_v: gains.voltage_vec(),
            gain_t: gains.thermal_vec(),
            gp_v: None,
            gp_t: None,
            ambient,
            output: OutputMode::Fixed,
        }
    }

    pub fn with_models(mut self, gp_v: Option<&'a GpModel>, gp_t: Option<&'a GpModel>) -> Self {
        self.gp_v = gp_v;
        self.gp_t = gp_t;
        self
    }

    pub fn with_output(mut self, output: OutputMode) -> Self {
        self.output = output;
        self
    }

    fn predicted_voltage(&self, z1: &DVector<f64>, z2: &DVector<f64>, current: f64) -> Result<f64> {
        match self.output {
            OutputMode::Fixed => Ok(self.ss.linear_voltage(z1, current)),
            OutputMode::Relinearized => {
                terminal_voltage(self.params, z1, current, average_temperature(z2))
            }
        }
    }

    pub fn step(
        &self,
        obs: &ObserverState,
        m: &Measurement,
        step: usize,
    ) -> Result<(ObserverState, Residuals)> {
        let diverged = |what: String| Error::ObserverDiverged { step, what };
        let omega_v = match self.gp_v {
            Some(gp) => gp.predict_mean(&[m.current, m.voltage])?,
            None => 0.0,
        };
        let y1_hat = self
            .predicted_voltage(&obs.z1_hat, &obs.z2_hat, m.current)
            .map_err(|e| diverged(e.to_string()))?
            + omega_v;
        let r_v = m.voltage - y1_hat;
        let z1_next = self.ss.electrochemical_step(&obs.z1_hat, m.current) + &self.gain_v * r_v;

        let omega_t = match self.gp_t {
            Some(gp) => gp.predict_mean(&[m.current, m.voltage, m.temperature])?,
            None => 0.0,
        };
        let r_t = m.temperature - (self.ss.surface_temperature(&obs.z2_hat) + omega_t);
        let ocv = open_circuit_voltage_saturated(self.params, obs.z1_hat[obs.z1_hat.len() - 1]);
        let heat = m.current * (ocv - m.voltage);
        let z2_next = self.ss.thermal_step(&obs.z2_hat, self.ambient, heat) + &self.gain_t * r_t;

        if !(r_v.is_finite() && r_t.is_finite()) {
            return Err(diverged("non-finite residual".into()));
        }
        let c_lim = DIVERGENCE_FACTOR * self.params.c_max_a;
        if z1_next.iter().any(|c| !(c.abs() <= c_lim)) {
            return Err(diverged("concentration estimate diverged".into()));
        }
        if z2_next
            .iter()
            .any(|t| !((t - self.ambient).abs() <= DIVERGENCE_TEMPERATURE))
        {
            return Err(diverged("temperature estimate diverged".into()));
        }
        Ok((
            ObserverState {
                z1_hat: z1_next,
                z2_hat: z2_next,
                t: m.t + self.params.dt,
            },
            Residuals { t: m.t, r_v, r_t },
        ))
    }

    /// Runs over a record from the given initial estimate.
    pub fn run_from(&self, mut obs: ObserverState, rec: &CycleRecord) -> Result<Vec<Residuals>> {
        let mut out = Vec::with_capacity(rec.len());
        for (k, s) in rec.samples.iter().enumerate() {
            let (next, r) = self.step(&obs, &Measurement::from(s), k)?;
            out.push(r);
            obs = next;
        }
        Ok(out)
    }

    /// Runs over a record starting from its nominal initial condition.
    pub fn run(&self, rec: &CycleRecord) -> Result<Vec<Residuals>> {
        let init = ObserverState::uniform(
            self.params,
            rec.meta.initial_soc,
            rec.meta.initial_temperature,
        );
        self.run_from(init, rec)
    }
}

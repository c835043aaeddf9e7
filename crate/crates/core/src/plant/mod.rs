//! Truth-model simulator: nonlinear voltage, two-way thermal coupling,
//! charging protocols, injected faults and measurement errors.

mod fault;
mod protocol;
mod record;
mod uncertainty;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use fault::{voltage_fault_signal, FaultConfig, ThermalFault, VoltageFault};
pub use protocol::{read_current_profile, Protocol, ProtocolKind, Stage, VOLTAGE_LIMIT_RANGE};
pub use record::{
    meta_path, parse_samples, CycleRecord, Phase, RecordMeta, Sample, CSV_HEADER, RECORD_SCHEMA,
};
pub use uncertainty::{
    NoiseSource, ThermalUncertainty, UncertaintyConfig, VoltageUncertainty, BAND_CUTOFF_HZ,
};

use crate::error::{Error, Result};
use crate::model::{
    average_temperature, build_electrochemical, build_thermal, heat_generation, soc,
    terminal_voltage, voltage_current_slope, CellParams, Electrochemical, PlantState, Thermal,
};

/// Fraction of the voltage error removed per step by the constant-voltage
/// current regulator.
const CV_LOOP_GAIN: f64 = 0.8;

/// Everything needed to simulate one cycle.
#[derive(Debug, Clone)]
pub struct CycleSetup {
    /// Nominal cell; uncertainty may perturb the truth model from it.
    pub params: CellParams,
    pub protocol: Protocol,
    pub fault: FaultConfig,
    pub uncertainty: UncertaintyConfig,
    pub ambient: f64,
    pub initial_soc: f64,
    pub initial_temperature: f64,
    pub seed: u64,
    pub cycle_index: usize,
}

impl CycleSetup {
    pub fn new(params: CellParams, protocol: Protocol) -> Self {
        Self {
            params,
            protocol,
            fault: FaultConfig::none(),
            uncertainty: UncertaintyConfig::none(),
            ambient: 298.15,
            initial_soc: 0.0,
            initial_temperature: 298.15,
            seed: 0,
            cycle_index: 0,
        }
    }
}

/// The truth model with its fault and error generators.
#[derive(Debug, Clone)]
pub struct Plant {
    params: CellParams,
    electro: Electrochemical,
    thermal: Thermal,
    fault: FaultConfig,
    noise: NoiseSource,
    ambient: f64,
}

impl Plant {
    pub fn new(
        nominal: &CellParams,
        fault: &FaultConfig,
        uncertainty: &UncertaintyConfig,
        ambient: f64,
        cycle_index: usize,
        seed: u64,
    ) -> Result<Self> {
        fault.validate()?;
        uncertainty.validate()?;
        let params = uncertainty.plant_params(nominal, cycle_index)?;
        let electro = build_electrochemical(&params)?;
        let thermal = build_thermal(&params)?;
        let noise = NoiseSource::new(uncertainty, ChaCha8Rng::seed_from_u64(seed), params.dt);
        Ok(Self {
            params,
            electro,
            thermal,
            fault: fault.clone(),
            noise,
            ambient,
        })
    }

    /// Parameters of the truth model.
    pub fn params(&self) -> &CellParams {
        &self.params
    }

    pub fn true_voltage(&self, state: &PlantState, current: f64) -> Result<f64> {
        terminal_voltage(
            &self.params,
            &state.z1,
            current,
            average_temperature(&state.z2),
        )
    }

    /// Outputs at the current state under `current`.
    pub fn measure(&mut self, state: &PlantState, current: f64) -> Result<Sample> {
        let t = state.t;
        let v_true = self.true_voltage(state, current)?;
        let s = soc(&self.params, &state.z1);
        let (wv, wt) = self.noise.sample(t, s);
        let dv = self.fault.voltage_signal(t);
        let t_true = state.surface_temperature();
        Ok(Sample {
            t,
            current,
            v_meas: v_true + wv + dv,
            t_meas: t_true + wt,
            v_true,
            t_true,
            fault_voltage: dv,
            fault_power: self.fault.thermal_power(t),
            noise_voltage: wv,
            noise_temperature: wt,
        })
    }

    /// Heat released inside the cell for the measured sample (W).
    pub fn heat(&self, state: &PlantState, sample: &Sample) -> Result<f64> {
        let q = heat_generation(&self.params, &state.z1, sample.current, sample.v_true)?;
        let s = soc(&self.params, &state.z1);
        Ok(q + self.noise.reversible_heat(sample.current, s) + sample.fault_power)
    }

    pub fn advance(&self, state: &PlantState, sample: &Sample, step: usize) -> Result<PlantState> {
        let heat = self.heat(state, sample)?;
        let z1 = &self.electro.a * &state.z1 + &self.electro.b * sample.current;
        let mut z2 = &self.thermal.a * &state.z2 + &self.thermal.b * self.ambient;
        z2.add_scalar_mut(self.thermal.heat_gain * heat);
        let next = PlantState {
            z1,
            z2,
            t: state.t + self.params.dt,
        };
        if let Some(what) = next.envelope_violation(&self.params) {
            return Err(Error::SimulationDiverged { step, what });
        }
        Ok(next)
    }

    /// Measures at `state` under `current`, then advances one sample.
    pub fn step(
        &mut self,
        state: &PlantState,
        current: f64,
        step: usize,
    ) -> Result<(PlantState, Sample)> {
        let sample = self.measure(state, current)?;
        let next = self.advance(state, &sample, step)?;
        Ok((next, sample))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Cc,
    Cv,
    Rest { until: f64 },
}

struct Controller<'a> {
    protocol: &'a Protocol,
    mode: Mode,
    last_current: f64,
    stage: usize,
    cv_start: Option<f64>,
    rest_start: Option<f64>,
}

impl<'a> Controller<'a> {
    fn new(protocol: &'a Protocol) -> Self {
        Self {
            protocol,
            mode: Mode::Cc,
            last_current: 0.0,
            stage: 0,
            cv_start: None,
            rest_start: None,
        }
    }

    fn current(&mut self, plant: &Plant, state: &PlantState, k: usize) -> Result<f64> {
        let p = plant.params();
        let i = match &self.protocol.kind {
            ProtocolKind::ConstantCurrent { current } => *current,
            ProtocolKind::Cccv {
                charge_current,
                voltage_limit,
                ..
            } => {
                let charge = -charge_current.abs();
                match self.mode {
                    Mode::Rest { .. } => 0.0,
                    Mode::Cc => {
                        if plant.true_voltage(state, charge)? >= *voltage_limit {
                            self.mode = Mode::Cv;
                            self.cv_start = Some(state.t);
                            self.regulate(plant, state, charge, *voltage_limit)?
                        } else {
                            charge
                        }
                    }
                    Mode::Cv => {
                        let prev = self.last_current;
                        self.regulate(plant, state, prev, *voltage_limit)?
                    }
                }
            }
            ProtocolKind::FastChargeProfile { stages } => {
                let s = soc(p, &state.z1);
                while self.stage + 1 < stages.len() && s >= stages[self.stage].until_soc - 1e-9 {
                    self.stage += 1;
                }
                -stages[self.stage].current.abs()
            }
            ProtocolKind::CsvReplay { currents, .. } => currents[k.min(currents.len() - 1)],
        };
        self.last_current = i;
        Ok(i)
    }

    fn regulate(&self, plant: &Plant, state: &PlantState, prev: f64, limit: f64) -> Result<f64> {
        let p = plant.params();
        let v = plant.true_voltage(state, prev)?;
        let slope = voltage_current_slope(p, prev, average_temperature(&state.z2));
        let gain = CV_LOOP_GAIN / slope.abs();
        let lo = match &self.protocol.kind {
            ProtocolKind::Cccv { charge_current, .. } => -charge_current.abs(),
            _ => prev,
        };
        Ok((prev + gain * (v - limit)).clamp(lo, 0.0))
    }

    /// Whether the sample just recorded at `state` is the last one.
    fn finished(&mut self, plant: &Plant, state: &PlantState, current: f64, k: usize) -> bool {
        let p = plant.params();
        let t = state.t;
        let tol = 1e-9;
        if let Some(d) = self.protocol.duration {
            if t >= d - tol * p.dt {
                return true;
            }
        }
        let s = soc(p, &state.z1);
        if let Some(stop) = self.protocol.soc_stop {
            let reached = if current <= 0.0 {
                s >= stop - tol
            } else {
                s <= stop + tol
            };
            if reached && current != 0.0 {
                return true;
            }
        }
        match &self.protocol.kind {
            ProtocolKind::ConstantCurrent { .. } => false,
            ProtocolKind::Cccv {
                cutoff_current,
                rest,
                ..
            } => match self.mode {
                Mode::Cc => false,
                Mode::Cv => {
                    if current.abs() <= *cutoff_current {
                        if *rest > 0.0 {
                            let start = t + p.dt;
                            self.rest_start = Some(start);
                            self.mode = Mode::Rest {
                                until: start + rest,
                            };
                            false
                        } else {
                            true
                        }
                    } else {
                        false
                    }
                }
                Mode::Rest { until } => t >= until - tol * p.dt,
            },
            ProtocolKind::FastChargeProfile { stages } => {
                s >= stages[stages.len() - 1].until_soc - tol
            }
            ProtocolKind::CsvReplay { currents, .. } => k + 1 >= currents.len(),
        }
    }
}

/// Simulates one cycle from a uniform initial state.
pub fn run_cycle(setup: &CycleSetup) -> Result<CycleRecord> {
    let initial = PlantState::uniform(&setup.params, setup.initial_soc, setup.initial_temperature);
    run_cycle_from(setup, initial)
}

/// Simulates one cycle from an explicit initial state.
pub fn run_cycle_from(setup: &CycleSetup, initial: PlantState) -> Result<CycleRecord> {
    setup.protocol.validate()?;
    if let ProtocolKind::CsvReplay { currents, .. } = &setup.protocol.kind {
        if currents.is_empty() {
            return Err(Error::config("csv replay protocol has no samples loaded"));
        }
    }
    let mut plant = Plant::new(
        &setup.params,
        &setup.fault,
        &setup.uncertainty,
        setup.ambient,
        setup.cycle_index,
        setup.seed,
    )?;
    if let Some(what) = initial.envelope_violation(plant.params()) {
        return Err(Error::SimulationDiverged { step: 0, what });
    }
    let initial_soc = soc(plant.params(), &initial.z1);
    let initial_temperature = average_temperature(&initial.z2);
    let mut ctl = Controller::new(&setup.protocol);
    let mut state = initial;
    let mut samples = Vec::new();
    let mut k = 0usize;
    loop {
        let current = ctl.current(&plant, &state, k)?;
        let sample = plant.measure(&state, current)?;
        samples.push(sample);
        if ctl.finished(&plant, &state, current, k) {
            break;
        }
        if k >= setup.protocol.max_steps {
            return Err(Error::NonTermination {
                max_steps: setup.protocol.max_steps,
            });
        }
        state = plant.advance(&state, &sample, k + 1)?;
        k += 1;
    }
    Ok(CycleRecord {
        samples,
        meta: RecordMeta {
            schema: RECORD_SCHEMA.to_string(),
            cycle_index: setup.cycle_index,
            seed: setup.seed,
            dt: setup.params.dt,
            ambient: setup.ambient,
            initial_soc,
            initial_temperature,
            protocol: setup.protocol.clone(),
            fault: setup.fault.clone(),
            uncertainty: setup.uncertainty.clone(),
            cv_start: ctl.cv_start,
            rest_start: ctl.rest_start,
        },
    })
}

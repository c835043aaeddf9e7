//! Scenario files: everything needed to reproduce one simulate-learn-detect
//! run from a seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::{
    calibrate, latency, FaultDecision, LearnedModels, LearningSettings, Persistence, ResidualTrace,
    Thresholds, DEFAULT_DELTA_T, DEFAULT_DELTA_V,
};
use crate::error::{Error, Result};
use crate::io::read_json;
use crate::model::CellParams;
use crate::observer::{ObserverDesign, OutputMode, Residuals};
use crate::pipeline::{DetectionSetup, OperatingPoint};
use crate::plant::{run_cycle, CycleRecord, CycleSetup, FaultConfig, Protocol, UncertaintyConfig};

pub const SCENARIO_SCHEMA: &str = "cellguard.scenario/1";

fn scenario_schema() -> String {
    SCENARIO_SCHEMA.to_string()
}
fn default_ambient() -> f64 {
    298.15
}

/// Where detection thresholds come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum ThresholdSource {
    Fixed {
        #[serde(rename = "delta_V")]
        delta_v: f64,
        #[serde(rename = "delta_T")]
        delta_t: f64,
    },
    /// Largest residuals over fault-free cycles simulated after training.
    Calibrate { cycles: usize },
    /// A thresholds file written by `calibrate`.
    File { path: PathBuf },
}

impl Default for ThresholdSource {
    fn default() -> Self {
        ThresholdSource::Fixed {
            delta_v: DEFAULT_DELTA_V,
            delta_t: DEFAULT_DELTA_T,
        }
    }
}

/// Fault-free cycles used to fit the mismatch models before detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Training {
    /// Zero disables learning.
    pub cycles: usize,
    /// Seed of the first training cycle; later cycles add their offset.
    pub seed: u64,
    /// Cycle index of the first training cycle.
    pub first_cycle: usize,
}

impl Default for Training {
    fn default() -> Self {
        Self {
            cycles: 1,
            seed: 1,
            first_cycle: 1,
        }
    }
}

/// What a campaign varies within one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SweepTarget {
    /// Power of the thermal fault (W).
    ThermalPower,
    /// Multiplier on both voltage-fault amplitudes.
    VoltageScale,
    /// Relative error of one truth-model parameter.
    ParameterError { key: String },
    /// Amplitude of the smooth voltage mismatch (V).
    SmoothVoltage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bisection {
    /// Assumed undetected.
    pub lo: f64,
    /// Assumed detected.
    pub hi: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    #[serde(flatten)]
    pub target: SweepTarget,
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default)]
    pub bisection: Option<Bisection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "scenario_schema")]
    pub schema: String,
    pub name: String,
    /// Cell configuration file; the built-in default cell when absent.
    #[serde(default)]
    pub cell: Option<PathBuf>,
    pub protocol: Protocol,
    #[serde(default)]
    pub fault: FaultConfig,
    #[serde(default)]
    pub uncertainty: UncertaintyConfig,
    #[serde(default)]
    pub observer: ObserverDesign,
    #[serde(default)]
    pub operating_point: OperatingPoint,
    #[serde(default)]
    pub output_mode: OutputMode,
    #[serde(default)]
    pub learning: LearningSettings,
    #[serde(default)]
    pub training: Training,
    #[serde(default)]
    pub thresholds: ThresholdSource,
    #[serde(default)]
    pub persistence: Option<Persistence>,
    /// Seed of the detection cycle.
    #[serde(default)]
    pub seed: u64,
    /// Cycle index of the detection cycle; defaults to just after training.
    #[serde(default)]
    pub cycle_index: Option<usize>,
    #[serde(default = "default_ambient")]
    pub ambient: f64,
    #[serde(default)]
    pub initial_soc: f64,
    #[serde(default = "default_ambient")]
    pub initial_temperature: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// One detection run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub record: CycleRecord,
    pub residuals: Vec<Residuals>,
    pub decision: FaultDecision,
    pub thresholds: Thresholds,
    pub models: LearnedModels,
    pub summary: OutcomeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    /// Earliest fault onset, or the record end for fault-free runs.
    pub onset: Option<f64>,
    pub voltage_latency: Option<f64>,
    pub thermal_latency: Option<f64>,
    /// Alarmed samples before onset (all alarms for fault-free runs).
    pub voltage_false_alarms: usize,
    pub thermal_false_alarms: usize,
    pub max_abs_r_v: f64,
    pub max_abs_r_t: f64,
}

impl OutcomeSummary {
    pub fn any_false_alarm(&self) -> bool {
        self.voltage_false_alarms + self.thermal_false_alarms > 0
    }
}

impl Scenario {
    /// A scenario on the default cell with the given protocol and defaults
    /// everywhere else.
    pub fn new(name: &str, protocol: Protocol) -> Self {
        Self {
            schema: scenario_schema(),
            name: name.to_string(),
            cell: None,
            protocol,
            fault: FaultConfig::none(),
            uncertainty: UncertaintyConfig::none(),
            observer: ObserverDesign::default(),
            operating_point: OperatingPoint::default(),
            output_mode: OutputMode::default(),
            learning: LearningSettings::default(),
            training: Training::default(),
            thresholds: ThresholdSource::default(),
            persistence: None,
            seed: 0,
            cycle_index: None,
            ambient: default_ambient(),
            initial_soc: 0.0,
            initial_temperature: default_ambient(),
            output_dir: None,
            sweep: None,
            base_dir: None,
        }
    }

    pub fn from_json_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut s: Scenario = serde_json::from_str(text)?;
        s.base_dir = base_dir.map(Path::to_path_buf);
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut s: Scenario = read_json(path)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        s.validate().map_err(|e| match e {
            Error::Config { line, msg } => Error::Config {
                line,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })?;
        Ok(s)
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(Error::config(format!(
                "unsupported scenario schema {:?}",
                self.schema
            )));
        }
        if self.name.trim().is_empty() {
            return Err(Error::config("scenario name must not be empty"));
        }
        if let Some(c) = &self.cell {
            let full = self.resolve_path(c);
            if !full.exists() {
                return Err(Error::config(format!(
                    "cell config {} does not exist",
                    full.display()
                )));
            }
        }
        if let ThresholdSource::File { path } = &self.thresholds {
            let full = self.resolve_path(path);
            if !full.exists() {
                return Err(Error::config(format!(
                    "thresholds file {} does not exist",
                    full.display()
                )));
            }
        }
        self.protocol.validate()?;
        self.fault.validate()?;
        self.uncertainty.validate()?;
        if !(self.ambient > 0.0 && self.initial_temperature > 0.0) {
            return Err(Error::config("temperatures must be positive (K)"));
        }
        if !(0.0..=1.0).contains(&self.initial_soc) {
            return Err(Error::config("initial_soc must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<CellParams> {
        match &self.cell {
            Some(c) => CellParams::from_config_path(&self.resolve_path(c)),
            None => Ok(CellParams::default()),
        }
    }

    fn protocol(&self) -> Result<Protocol> {
        let mut p = self.protocol.clone();
        p.resolve(self.base_dir.as_deref())?;
        Ok(p)
    }

    pub fn detection_cycle_index(&self) -> usize {
        self.cycle_index
            .unwrap_or(self.training.first_cycle + self.training.cycles)
    }

    /// Setup for one cycle of this scenario's cell and protocol.
    pub fn cycle_setup(
        &self,
        params: &CellParams,
        seed: u64,
        index: usize,
        fault: &FaultConfig,
    ) -> Result<CycleSetup> {
        let mut s = CycleSetup::new(params.clone(), self.protocol()?);
        s.fault = fault.clone();
        s.uncertainty = self.uncertainty.clone();
        s.ambient = self.ambient;
        s.initial_soc = self.initial_soc;
        s.initial_temperature = self.initial_temperature;
        s.seed = seed;
        s.cycle_index = index;
        Ok(s)
    }

    /// The detection cycle, with this scenario's fault.
    pub fn simulate(&self) -> Result<CycleRecord> {
        let p = self.params()?;
        run_cycle(&self.cycle_setup(&p, self.seed, self.detection_cycle_index(), &self.fault)?)
    }

    pub fn detection_setup(&self) -> Result<DetectionSetup> {
        DetectionSetup::new(
            self.params()?,
            &self.observer,
            &self.operating_point,
            self.output_mode,
            self.ambient,
        )
    }

    /// Fault-free training cycles.
    pub fn training_records(&self) -> Result<Vec<CycleRecord>> {
        let p = self.params()?;
        (0..self.training.cycles)
            .map(|i| {
                let setup = self.cycle_setup(
                    &p,
                    self.training.seed + i as u64,
                    self.training.first_cycle + i,
                    &FaultConfig::none(),
                )?;
                run_cycle(&setup)
            })
            .collect()
    }

    /// Mismatch models fitted on the most recent training cycle. Training
    /// cycles are fault free by construction, so no gate is applied.
    pub fn learn(&self, setup: &DetectionSetup) -> Result<LearnedModels> {
        if self.training.cycles == 0 {
            return Ok(LearnedModels::default());
        }
        let p = self.params()?;
        let last = self.training.cycles - 1;
        let rec = run_cycle(&self.cycle_setup(
            &p,
            self.training.seed + last as u64,
            self.training.first_cycle + last,
            &FaultConfig::none(),
        )?)?;
        let (gv, gt) = LearnedModels::fit(&rec, setup, &self.learning)?;
        Ok(LearnedModels {
            voltage: Some(gv),
            thermal: Some(gt),
            version: self.training.cycles as u64,
        })
    }

    /// Thresholds from the configured source.
    pub fn thresholds(&self, setup: &DetectionSetup, models: &LearnedModels) -> Result<Thresholds> {
        match &self.thresholds {
            ThresholdSource::Fixed { delta_v, delta_t } => Thresholds::fixed(*delta_v, *delta_t),
            ThresholdSource::File { path } => Thresholds::load(&self.resolve_path(path)),
            ThresholdSource::Calibrate { cycles } => self.calibrate(setup, models, *cycles),
        }
    }

    /// Thresholds from `cycles` fault-free cycles following the training run.
    pub fn calibrate(
        &self,
        setup: &DetectionSetup,
        models: &LearnedModels,
        cycles: usize,
    ) -> Result<Thresholds> {
        let p = self.params()?;
        let first = self.training.first_cycle + self.training.cycles;
        let traces = (0..cycles)
            .map(|i| {
                let seed = self.training.seed + (self.training.cycles + i) as u64;
                let rec =
                    run_cycle(&self.cycle_setup(&p, seed, first + i, &FaultConfig::none())?)?;
                Ok(ResidualTrace {
                    id: format!("cycle-{}", first + i),
                    residuals: setup.residuals(&rec, models)?,
                    faulty: false,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        calibrate(&traces)
    }

    /// Earliest fault onset in this scenario.
    pub fn onset(&self) -> Option<f64> {
        let v = self.fault.voltage.as_ref().map(|f| f.window[0]);
        let t = self.fault.thermal.as_ref().map(|f| f.window[0]);
        match (v, t) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Simulate, learn, calibrate and detect.
    pub fn run(&self) -> Result<Outcome> {
        let setup = self.detection_setup()?;
        let models = self.learn(&setup)?;
        let thresholds = self.thresholds(&setup, &models)?;
        let record = self.simulate()?;
        let (residuals, decision) =
            setup.detect(&record, &models, &thresholds, self.persistence)?;
        let summary = summarize(&decision, &residuals, self.onset());
        Ok(Outcome {
            record,
            residuals,
            decision,
            thresholds,
            models,
            summary,
        })
    }
}

/// Latencies and false-alarm counts for one decision.
pub fn summarize(
    decision: &FaultDecision,
    residuals: &[Residuals],
    onset: Option<f64>,
) -> OutcomeSummary {
    let end = decision.t.last().copied().unwrap_or(0.0) + 1.0;
    let cut = onset.unwrap_or(end);
    let before = |voltage: bool| {
        decision
            .alarms(voltage)
            .iter()
            .zip(&decision.t)
            .filter(|(a, t)| **a && **t < cut)
            .count()
    };
    let lat = |voltage: bool| onset.and_then(|o| latency(decision, voltage, o).latency);
    OutcomeSummary {
        onset,
        voltage_latency: lat(true),
        thermal_latency: lat(false),
        voltage_false_alarms: before(true),
        thermal_false_alarms: before(false),
        max_abs_r_v: residuals.iter().map(|r| r.r_v.abs()).fold(0.0, f64::max),
        max_abs_r_t: residuals.iter().map(|r| r.r_t.abs()).fold(0.0, f64::max),
    }
}

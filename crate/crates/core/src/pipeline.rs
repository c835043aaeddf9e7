//! The nominal model, observers and learned models assembled for detection
//! runs over recorded cycles.

use serde::{Deserialize, Serialize};

use crate::detector::{decide, FaultDecision, LearnedModels, Persistence, Thresholds};
use crate::error::Result;
use crate::model::{build_state_space, CellParams, StateSpace};
use crate::observer::{DetectionObserver, ObserverDesign, ObserverGains, OutputMode, Residuals};
use crate::plant::CycleRecord;

/// Where the voltage map is linearized for the observer model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatingPoint {
    pub soc: f64,
    pub current: f64,
    /// Defaults to the ambient temperature.
    pub temperature: Option<f64>,
}

impl Default for OperatingPoint {
    fn default() -> Self {
        Self {
            soc: 0.5,
            current: 0.0,
            temperature: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DetectionSetup {
    pub params: CellParams,
    pub ss: StateSpace,
    pub gains: ObserverGains,
    pub output: OutputMode,
    pub ambient: f64,
}

impl DetectionSetup {
    pub fn new(
        params: CellParams,
        design: &ObserverDesign,
        op: &OperatingPoint,
        output: OutputMode,
        ambient: f64,
    ) -> Result<Self> {
        let ss = build_state_space(
            &params,
            op.soc,
            op.current,
            op.temperature.unwrap_or(ambient),
        )?;
        let gains = ObserverGains::design(&ss, design)?;
        Ok(Self {
            params,
            ss,
            gains,
            output,
            ambient,
        })
    }

    pub fn with_gains(mut self, gains: ObserverGains) -> Self {
        self.gains = gains;
        self
    }

    pub fn observer<'a>(&'a self, models: &'a LearnedModels) -> DetectionObserver<'a> {
        DetectionObserver::new(&self.params, &self.ss, &self.gains, self.ambient)
            .with_models(models.voltage.as_ref(), models.thermal.as_ref())
            .with_output(self.output)
    }

    pub fn residuals(&self, rec: &CycleRecord, models: &LearnedModels) -> Result<Vec<Residuals>> {
        let mut obs = self.observer(models);
        obs.ambient = rec.meta.ambient;
        obs.run(rec)
    }

    pub fn detect(
        &self,
        rec: &CycleRecord,
        models: &LearnedModels,
        thresholds: &Thresholds,
        persistence: Option<Persistence>,
    ) -> Result<(Vec<Residuals>, FaultDecision)> {
        let r = self.residuals(rec, models)?;
        let d = decide(&r, thresholds, persistence);
        Ok((r, d))
    }
}

//! Training sets for the model-mismatch GPs.
//!
//! Labels are the output errors of the nominal model run open loop over a
//! recorded cycle: measured voltage minus the linear voltage prediction, and
//! measured surface temperature minus the thermal model's surface node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CellParams, StateSpace};
use crate::observer::{DetectionObserver, ObserverGains, OutputMode};
use crate::plant::CycleRecord;

pub const MIN_CYCLE_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// Inputs `(I, V)`.
    Voltage,
    /// Inputs `(I, V, T_surface)`.
    Thermal,
}

impl DatasetKind {
    pub fn dim(self) -> usize {
        match self {
            DatasetKind::Voltage => 2,
            DatasetKind::Thermal => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyDataset {
    pub kind: DatasetKind,
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub source_cycle: usize,
}

impl UncertaintyDataset {
    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.labels.len() {
            return Err(Error::Dimension {
                expected: self.inputs.len(),
                got: self.labels.len(),
            });
        }
        if let Some(r) = self.inputs.iter().find(|r| r.len() != self.dim()) {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: r.len(),
            });
        }
        if self
            .inputs
            .iter()
            .flatten()
            .chain(&self.labels)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        Ok(())
    }
}

fn open_loop_residuals(
    cycle: &CycleRecord,
    params: &CellParams,
    ss: &StateSpace,
    output: OutputMode,
) -> Result<Vec<crate::observer::Residuals>> {
    if cycle.len() < MIN_CYCLE_SAMPLES {
        return Err(Error::invalid(format!(
            "cycle has {} samples, at least {MIN_CYCLE_SAMPLES} are needed",
            cycle.len()
        )));
    }
    let zero = ObserverGains::zero(params.N, params.M);
    DetectionObserver::new(params, ss, &zero, cycle.meta.ambient)
        .with_output(output)
        .run(cycle)
}

pub fn build_voltage_dataset(
    cycle: &CycleRecord,
    params: &CellParams,
    ss: &StateSpace,
    output: OutputMode,
) -> Result<UncertaintyDataset> {
    let res = open_loop_residuals(cycle, params, ss, output)?;
    Ok(UncertaintyDataset {
        kind: DatasetKind::Voltage,
        inputs: cycle
            .samples
            .iter()
            .map(|s| vec![s.current, s.v_meas])
            .collect(),
        labels: res.iter().map(|r| r.r_v).collect(),
        source_cycle: cycle.meta.cycle_index,
    })
}

pub fn build_thermal_dataset(
    cycle: &CycleRecord,
    params: &CellParams,
    ss: &StateSpace,
    output: OutputMode,
) -> Result<UncertaintyDataset> {
    let res = open_loop_residuals(cycle, params, ss, output)?;
    Ok(UncertaintyDataset {
        kind: DatasetKind::Thermal,
        inputs: cycle
            .samples
            .iter()
            .map(|s| vec![s.current, s.v_meas, s.t_meas])
            .collect(),
        labels: res.iter().map(|r| r.r_t).collect(),
        source_cycle: cycle.meta.cycle_index,
    })
}

//! Lifetime learning: after every cycle the mismatch GPs are refit on that
//! cycle if it was fault free; otherwise the models from the most recent
//! fault-free cycle stay in place. Before the first clean cycle there are
//! no models and the learned mismatch is taken as zero.

use serde::{Deserialize, Serialize};

use super::FaultDecision;
use crate::error::Result;
use crate::gpr::{build_thermal_dataset, build_voltage_dataset, GpModel, GpSettings};
use crate::pipeline::DetectionSetup;
use crate::plant::CycleRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningSettings {
    #[serde(default)]
    pub voltage: GpSettings,
    #[serde(default)]
    pub thermal: GpSettings,
}

impl Default for LearningSettings {
    fn default() -> Self {
        Self {
            voltage: GpSettings {
                jitter: Some(1e-6),
                ..GpSettings::default()
            },
            thermal: GpSettings {
                jitter: Some(2.5e-3),
                ..GpSettings::default()
            },
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LearnedModels {
    pub voltage: Option<GpModel>,
    pub thermal: Option<GpModel>,
    pub version: u64,
}

impl LearnedModels {
    /// Fits both models on one cycle.
    pub fn fit(
        cycle: &CycleRecord,
        setup: &DetectionSetup,
        settings: &LearningSettings,
    ) -> Result<(GpModel, GpModel)> {
        let dv = build_voltage_dataset(cycle, &setup.params, &setup.ss, setup.output)?;
        let dt = build_thermal_dataset(cycle, &setup.params, &setup.ss, setup.output)?;
        let gv = GpModel::fit(
            &dv,
            &settings.voltage.hyper_for(&dv),
            settings.voltage.max_points,
        )?;
        let gt = GpModel::fit(
            &dt,
            &settings.thermal.hyper_for(&dt),
            settings.thermal.max_points,
        )?;
        Ok((gv, gt))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub cycle: usize,
    pub fault_detected: bool,
    pub used_for_training: bool,
    /// Model version in force after this cycle (0 means no models).
    pub artifact_version: u64,
    /// Cycle the models in force were trained on.
    pub trained_on: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningLedger {
    pub entries: Vec<LedgerEntry>,
    pub version: u64,
    pub trained_on: Option<usize>,
}

impl LearningLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one cycle. `train` runs only when the decision is fault free.
    pub fn record<F>(
        &mut self,
        cycle: usize,
        decision: &FaultDecision,
        train: F,
    ) -> Result<&LedgerEntry>
    where
        F: FnOnce() -> Result<()>,
    {
        let fault_detected = decision.any_fault();
        if !fault_detected {
            train()?;
            self.version += 1;
            self.trained_on = Some(cycle);
        }
        self.entries.push(LedgerEntry {
            cycle,
            fault_detected,
            used_for_training: !fault_detected,
            artifact_version: self.version,
            trained_on: self.trained_on,
        });
        Ok(self.entries.last().expect("just pushed"))
    }
}

/// One step of the learning loop for `cycle` given its decision.
pub fn lifetime_update(
    ledger: &mut LearningLedger,
    models: &mut LearnedModels,
    cycle: &CycleRecord,
    decision: &FaultDecision,
    setup: &DetectionSetup,
    settings: &LearningSettings,
) -> Result<LedgerEntry> {
    let entry = ledger.record(cycle.meta.cycle_index, decision, || {
        let (gv, gt) = LearnedModels::fit(cycle, setup, settings)?;
        models.voltage = Some(gv);
        models.thermal = Some(gt);
        Ok(())
    })?;
    models.version = entry.artifact_version;
    Ok(entry.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decision(faulty: bool) -> FaultDecision {
        FaultDecision {
            t: vec![0.0],
            voltage: vec![faulty],
            thermal: vec![false],
            first_voltage: faulty.then_some(0.0),
            first_thermal: None,
            persistence: None,
        }
    }

    #[test]
    fn faulty_first_cycle_keeps_zero_models() {
        let mut l = LearningLedger::new();
        let mut called = false;
        let e = l
            .record(1, &decision(true), || {
                called = true;
                Ok(())
            })
            .unwrap();
        assert!(!called);
        assert_eq!(e.artifact_version, 0);
        assert_eq!(e.trained_on, None);
    }

    #[test]
    fn faulty_cycle_is_idempotent() {
        let mut l = LearningLedger::new();
        l.record(1, &decision(false), || Ok(())).unwrap();
        let e = l
            .record(2, &decision(true), || unreachable!())
            .unwrap()
            .clone();
        assert_eq!(e.artifact_version, 1);
        assert_eq!(e.trained_on, Some(1));
        assert!(!e.used_for_training);
    }
}

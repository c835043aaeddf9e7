//! Ten alternating faulty and clean cycles through the learning gate,
//! compared with a hand-traced ledger.

use std::collections::BTreeMap;

use cellguard::detector::{lifetime_update, LearnedModels, LearningLedger, LedgerEntry};
use cellguard::observer::OutputMode;
use cellguard::plant::{run_cycle, FaultConfig};
use cellguard::scenario::Scenario;

use crate::{fail, scenarios_dir, Check};

/// `(cycle, fault detected, used for training, version, trained on)` as
/// traced by hand: odd cycles carry a fault and leave the models alone,
/// even cycles retrain and bump the version.
const EXPECTED: [(usize, bool, bool, u64, Option<usize>); 10] = [
    (1, true, false, 0, None),
    (2, false, true, 1, Some(2)),
    (3, true, false, 1, Some(2)),
    (4, false, true, 2, Some(4)),
    (5, true, false, 2, Some(4)),
    (6, false, true, 3, Some(6)),
    (7, true, false, 3, Some(6)),
    (8, false, true, 4, Some(8)),
    (9, true, false, 4, Some(8)),
    (10, false, true, 5, Some(10)),
];

pub fn check() -> Check {
    let dir = scenarios_dir();
    let mut s = Scenario::load(&dir.join("no_fault.json")).map_err(fail)?;
    s.output_mode = OutputMode::Relinearized;
    let fault = Scenario::load(&dir.join("thermal_fault_310w.json"))
        .map_err(fail)?
        .fault;
    let params = s.params().map_err(fail)?;
    let setup = s.detection_setup().map_err(fail)?;
    let th = cellguard::detector::Thresholds::fixed(0.01, 0.5).map_err(fail)?;

    let mut ledger = LearningLedger::new();
    let mut models = LearnedModels::default();
    let mut clean: BTreeMap<usize, bool> = BTreeMap::new();
    for cycle in 1..=10usize {
        let f = if cycle % 2 == 1 {
            fault.clone()
        } else {
            FaultConfig::none()
        };
        let cs = s
            .cycle_setup(&params, 100 + cycle as u64, cycle, &f)
            .map_err(fail)?;
        let rec = run_cycle(&cs).map_err(fail)?;
        let (_, decision) = setup.detect(&rec, &models, &th, None).map_err(fail)?;
        clean.insert(cycle, !decision.any_fault());
        let entry = lifetime_update(
            &mut ledger,
            &mut models,
            &rec,
            &decision,
            &setup,
            &s.learning,
        )
        .map_err(fail)?;
        let sources = (
            models.voltage.as_ref().map(|m| m.source_cycle()),
            models.thermal.as_ref().map(|m| m.source_cycle()),
        );
        if sources != (entry.trained_on, entry.trained_on) {
            return Err(format!(
                "cycle {cycle}: models trained on {sources:?}, ledger says {:?}",
                entry.trained_on
            ));
        }
        if let Some(src) = entry.trained_on {
            if !clean[&src] {
                return Err(format!(
                    "models in force after cycle {cycle} come from flagged cycle {src}"
                ));
            }
        }
    }
    let expected: Vec<LedgerEntry> = EXPECTED
        .iter()
        .map(
            |&(cycle, fault_detected, used_for_training, artifact_version, trained_on)| {
                LedgerEntry {
                    cycle,
                    fault_detected,
                    used_for_training,
                    artifact_version,
                    trained_on,
                }
            },
        )
        .collect();
    if ledger.entries != expected {
        let got: Vec<_> = ledger
            .entries
            .iter()
            .map(|e| (e.cycle, e.fault_detected, e.artifact_version, e.trained_on))
            .collect();
        return Err(format!("ledger differs from the hand trace: {got:?}"));
    }
    if ledger.version != 5 || ledger.trained_on != Some(10) {
        return Err(format!(
            "final ledger state version {} trained on {:?}",
            ledger.version, ledger.trained_on
        ));
    }
    Ok(
        "10 alternating cycles match the hand trace; models always from the last clean cycle"
            .into(),
    )
}

//! On-disk artifacts produced by the command-line front end, and schema
//! validation for every artifact kind.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::campaign::{Campaign, CampaignSummary, SUMMARY_SCHEMA};
use crate::detector::{FaultDecision, LearnedModels, LearningLedger, Thresholds};
use crate::error::{Error, Result};
use crate::gpr::{GpArtifact, GpModel, GP_SCHEMA};
use crate::identify::{IdentificationReport, ProblemFile, PROBLEM_SCHEMA, REPORT_SCHEMA};
use crate::io::{atomic_write, fmt_f64, read_json, read_text, write_json};
use crate::model::CellParams;
use crate::observer::{Residuals, SweepReport};
use crate::plant::{meta_path, parse_samples, CycleRecord, RecordMeta, CSV_HEADER, RECORD_SCHEMA};
use crate::scenario::{OutcomeSummary, Scenario, SCENARIO_SCHEMA};

pub const RESIDUAL_HEADER: &str = "t,r_V,r_T,delta_V,delta_T,flag_V,flag_T";
pub const DECISION_SCHEMA: &str = "cellguard.decision/1";
pub const LEDGER_SCHEMA: &str = "cellguard.ledger/1";
pub const VERIFICATION_SCHEMA: &str = "cellguard.verification/1";

pub const VOLTAGE_MODEL_FILE: &str = "gp_voltage.json";
pub const THERMAL_MODEL_FILE: &str = "gp_thermal.json";
pub const LEDGER_FILE: &str = "ledger.json";

/// Residual trace with thresholds and per-sample flags as CSV.
pub fn residuals_csv(residuals: &[Residuals], decision: &FaultDecision, th: &Thresholds) -> String {
    let mut s = String::with_capacity(64 * (residuals.len() + 1));
    s.push_str(RESIDUAL_HEADER);
    s.push('\n');
    let (fv, ft) = (decision.alarms(true), decision.alarms(false));
    for (i, r) in residuals.iter().enumerate() {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(r.t),
            fmt_f64(r.r_v),
            fmt_f64(r.r_t),
            fmt_f64(th.delta_v),
            fmt_f64(th.delta_t),
            fv[i] as u8,
            ft[i] as u8
        ));
    }
    s
}

/// Decision summary written by `detect`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub schema: String,
    pub scenario: String,
    pub record: Option<PathBuf>,
    pub samples: usize,
    pub thresholds: Thresholds,
    pub fault_detected: bool,
    pub first_voltage_alarm: Option<f64>,
    pub first_thermal_alarm: Option<f64>,
    pub summary: OutcomeSummary,
    /// Samples needed for the slower observer's transient to fall to 0.1%.
    pub settling_steps: usize,
    /// The record is at least as long as the settling window.
    pub settled: bool,
    /// Whether learned mismatch models were applied.
    pub learned_models: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Writes both mismatch models into `dir`.
pub fn save_models(dir: &Path, models: &LearnedModels) -> Result<()> {
    let (Some(v), Some(t)) = (&models.voltage, &models.thermal) else {
        return Err(Error::invalid("no models to save"));
    };
    write_json(
        &dir.join(VOLTAGE_MODEL_FILE),
        &v.to_artifact(models.version),
    )?;
    write_json(
        &dir.join(THERMAL_MODEL_FILE),
        &t.to_artifact(models.version),
    )
}

/// Loads the models in `dir`. Missing files leave that model empty and add
/// a warning; malformed files are errors.
pub fn load_models(dir: &Path) -> Result<(LearnedModels, Vec<String>)> {
    let mut out = LearnedModels::default();
    let mut warnings = Vec::new();
    for (file, voltage) in [(VOLTAGE_MODEL_FILE, true), (THERMAL_MODEL_FILE, false)] {
        let path = dir.join(file);
        if !path.exists() {
            warnings.push(format!(
                "{} not found; learned mismatch taken as zero",
                path.display()
            ));
            continue;
        }
        let a: GpArtifact = read_json(&path)?;
        out.version = out.version.max(a.version);
        let m = GpModel::from_artifact(&a)?;
        if voltage {
            out.voltage = Some(m);
        } else {
            out.thermal = Some(m);
        }
    }
    Ok((out, warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerFile {
    pub schema: String,
    pub ledger: LearningLedger,
}

impl LedgerFile {
    pub fn load_or_new(path: &Path) -> Result<Self> {
        if path.exists() {
            let f: LedgerFile = read_json(path)?;
            check_schema(&f.schema, LEDGER_SCHEMA)?;
            Ok(f)
        } else {
            Ok(Self {
                schema: LEDGER_SCHEMA.into(),
                ledger: LearningLedger::new(),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationFile {
    pub schema: String,
    pub scenario: String,
    pub voltage: SweepReport,
    pub thermal: SweepReport,
}

fn check_schema(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::config(format!(
            "schema {found:?} where {expected:?} was expected"
        )));
    }
    Ok(())
}

fn check_residual_csv(text: &str) -> Result<usize> {
    let mut lines = text.lines();
    if lines.next() != Some(RESIDUAL_HEADER) {
        return Err(Error::config(format!(
            "residual CSV header must be {RESIDUAL_HEADER}"
        )));
    }
    let mut n = 0;
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let bad = fields.len() != 7
            || fields[..5].iter().any(|f| f.parse::<f64>().is_err())
            || fields[5..].iter().any(|f| *f != "0" && *f != "1");
        if bad {
            return Err(Error::Config {
                line: Some(i + 2),
                msg: "malformed residual row".into(),
            });
        }
        n += 1;
    }
    Ok(n)
}

/// Validates any artifact and names its kind.
pub fn check_file(path: &Path) -> Result<String> {
    let text = read_text(path)?;
    if text.contains('\r') {
        return Err(Error::config("artifacts must use LF line endings"));
    }
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "csv" => {
            let header = text.lines().next().unwrap_or("");
            if header == CSV_HEADER {
                let n = if meta_path(path).exists() {
                    CycleRecord::load(path)?.len()
                } else {
                    parse_samples(&text)?.len()
                };
                Ok(format!("cycle record ({n} samples)"))
            } else if header == RESIDUAL_HEADER {
                Ok(format!(
                    "residual trace ({} samples)",
                    check_residual_csv(&text)?
                ))
            } else {
                Err(Error::config(format!("unrecognized CSV header {header:?}")))
            }
        }
        "cfg" => {
            if text.lines().any(|l| l.trim_start().starts_with("delta_V")) {
                Thresholds::from_config_str(&text)?;
                Ok("thresholds".into())
            } else {
                CellParams::from_config_str(&text, path.parent())?;
                Ok("cell parameters".into())
            }
        }
        "json" => {
            let v: serde_json::Value = serde_json::from_str(&text)?;
            let schema = v
                .get("schema")
                .and_then(|s| s.as_str())
                .ok_or_else(|| Error::config("JSON artifact has no \"schema\" field"))?
                .to_string();
            match schema.as_str() {
                RECORD_SCHEMA => {
                    serde_json::from_value::<RecordMeta>(v)?;
                    Ok("cycle metadata".into())
                }
                GP_SCHEMA => {
                    GpModel::from_artifact(&serde_json::from_value::<GpArtifact>(v)?)?;
                    Ok("GP model".into())
                }
                SCENARIO_SCHEMA => {
                    Scenario::load(path)?;
                    Ok("scenario".into())
                }
                crate::campaign::CAMPAIGN_SCHEMA => {
                    Campaign::load(path)?;
                    Ok("campaign".into())
                }
                SUMMARY_SCHEMA => {
                    serde_json::from_value::<CampaignSummary>(v)?;
                    Ok("campaign summary".into())
                }
                PROBLEM_SCHEMA => {
                    ProblemFile::load(path)?;
                    Ok("identification problem".into())
                }
                REPORT_SCHEMA => {
                    serde_json::from_value::<IdentificationReport>(v)?;
                    Ok("identification report".into())
                }
                DECISION_SCHEMA => {
                    serde_json::from_value::<DecisionReport>(v)?;
                    Ok("detection decision".into())
                }
                LEDGER_SCHEMA => {
                    serde_json::from_value::<LedgerFile>(v)?;
                    Ok("learning ledger".into())
                }
                VERIFICATION_SCHEMA => {
                    serde_json::from_value::<VerificationFile>(v)?;
                    Ok("verification report".into())
                }
                other => Err(Error::config(format!("unknown schema {other:?}"))),
            }
        }
        _ => Err(Error::config(format!(
            "cannot infer artifact kind of {}",
            path.display()
        ))),
    }
}

/// Writes text with a trailing newline, atomically.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    atomic_write(path, text.as_bytes())
}

//! Simulated or measured cycle time series and their CSV/JSON persistence.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FaultConfig, Protocol, UncertaintyConfig};
use crate::error::{Error, Result};
use crate::io::{atomic_write, fmt_f64, read_json, read_text, write_json};

pub const CSV_HEADER: &str = "t,I,V_meas,T_meas,V_true,T_true,dV,dT,wV,wT";
pub const RECORD_SCHEMA: &str = "cellguard.cycle/1";

/// One sample. `fault_voltage` and `noise_voltage` are the injected fault
/// and error channels, so `v_meas = v_true + noise_voltage + fault_voltage`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    #[serde(rename = "I")]
    pub current: f64,
    #[serde(rename = "V_meas")]
    pub v_meas: f64,
    #[serde(rename = "T_meas")]
    pub t_meas: f64,
    #[serde(rename = "V_true")]
    pub v_true: f64,
    #[serde(rename = "T_true")]
    pub t_true: f64,
    /// Injected voltage fault (V).
    #[serde(rename = "dV")]
    pub fault_voltage: f64,
    /// Injected thermal fault power (W).
    #[serde(rename = "dT")]
    pub fault_power: f64,
    #[serde(rename = "wV")]
    pub noise_voltage: f64,
    #[serde(rename = "wT")]
    pub noise_temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    ConstantCurrent,
    ConstantVoltage,
    Rest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub schema: String,
    pub cycle_index: usize,
    pub seed: u64,
    pub dt: f64,
    pub ambient: f64,
    pub initial_soc: f64,
    pub initial_temperature: f64,
    pub protocol: Protocol,
    pub fault: FaultConfig,
    pub uncertainty: UncertaintyConfig,
    /// Time of the switch to constant-voltage charging, if any.
    #[serde(default)]
    pub cv_start: Option<f64>,
    #[serde(default)]
    pub rest_start: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub samples: Vec<Sample>,
    pub meta: RecordMeta,
}

impl CycleRecord {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn currents(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.current).collect()
    }

    /// Whether any fault was injected during the record.
    pub fn has_injected_fault(&self) -> bool {
        self.samples
            .iter()
            .any(|s| s.fault_voltage != 0.0 || s.fault_power != 0.0)
    }

    pub fn phase_at(&self, t: f64) -> Phase {
        match (self.meta.cv_start, self.meta.rest_start) {
            (_, Some(r)) if t >= r => Phase::Rest,
            (Some(c), _) if t >= c => Phase::ConstantVoltage,
            _ => Phase::ConstantCurrent,
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(self.samples.len() * 160);
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.samples {
            let cols = [
                r.t,
                r.current,
                r.v_meas,
                r.t_meas,
                r.v_true,
                r.t_true,
                r.fault_voltage,
                r.fault_power,
                r.noise_voltage,
                r.noise_temperature,
            ];
            let line: Vec<String> = cols.iter().map(|v| fmt_f64(*v)).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    /// Writes `path` and its metadata sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_csv_string().as_bytes())?;
        write_json(&meta_path(path), &self.meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let samples = parse_samples(&text)?;
        let meta: RecordMeta = read_json(&meta_path(path))?;
        if meta.schema != RECORD_SCHEMA {
            return Err(Error::config(format!(
                "unsupported record schema {:?}",
                meta.schema
            )));
        }
        Ok(Self { samples, meta })
    }
}

/// Sidecar metadata path: `run.csv` → `run.meta.json`.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

pub fn parse_samples(text: &str) -> Result<Vec<Sample>> {
    let first = text.lines().next().unwrap_or("");
    if first.trim_end_matches('\r') != CSV_HEADER {
        return Err(Error::Config {
            line: Some(1),
            msg: format!("expected header {CSV_HEADER:?}, found {first:?}"),
        });
    }
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Sample>().enumerate() {
        out.push(row.map_err(|e| Error::Config {
            line: Some(i + 2),
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

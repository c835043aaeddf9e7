//! Threshold decisions on observer residuals, threshold calibration,
//! detection latency and the fault-gated learning loop.

mod learning;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use learning::{lifetime_update, LearnedModels, LearningLedger, LearningSettings, LedgerEntry};

use crate::error::{Error, Result};
use crate::io::{atomic_write, fmt_f64, read_text};
use crate::observer::Residuals;

/// Replication defaults for the voltage (V) and temperature (K) thresholds.
pub const DEFAULT_DELTA_V: f64 = 0.01;
pub const DEFAULT_DELTA_T: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub delta_v: f64,
    pub delta_t: f64,
    #[serde(default)]
    pub provenance: Vec<String>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            delta_v: DEFAULT_DELTA_V,
            delta_t: DEFAULT_DELTA_T,
            provenance: Vec::new(),
        }
    }
}

impl Thresholds {
    pub fn fixed(delta_v: f64, delta_t: f64) -> Result<Self> {
        let t = Self {
            delta_v,
            delta_t,
            provenance: Vec::new(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_v > 0.0 && self.delta_t > 0.0) {
            return Err(Error::config("thresholds must be strictly positive"));
        }
        Ok(())
    }

    pub fn to_config_string(&self) -> String {
        let mut s = format!(
            "delta_V = {}\ndelta_T = {}\n",
            fmt_f64(self.delta_v),
            fmt_f64(self.delta_t)
        );
        if !self.provenance.is_empty() {
            s.push_str(&format!("provenance = {}\n", self.provenance.join(",")));
        }
        s
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let (mut dv, mut dt, mut prov) = (None, None, Vec::new());
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config {
                line: Some(i + 1),
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `name = value`, found {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || v.parse::<f64>().map_err(|e| err(format!("{k}: {e}")));
            match k {
                "delta_V" => dv = Some(num()?),
                "delta_T" => dt = Some(num()?),
                "provenance" => {
                    prov = v
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                }
                other => return Err(err(format!("unknown threshold key {other:?}"))),
            }
        }
        let t = Self {
            delta_v: dv.ok_or_else(|| Error::config("missing delta_V"))?,
            delta_t: dt.ok_or_else(|| Error::config("missing delta_T"))?,
            provenance: prov,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_config_string().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_config_str(&read_text(path)?).map_err(|e| match e {
            Error::Config { line, msg } => Error::Config {
                line,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })
    }
}

/// Residuals of one run labelled for calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTrace {
    pub id: String,
    pub residuals: Vec<Residuals>,
    /// Whether a fault was present during the run.
    pub faulty: bool,
}

/// Largest absolute residual per channel over fault-free runs.
pub fn calibrate(traces: &[ResidualTrace]) -> Result<Thresholds> {
    if traces.is_empty() {
        return Err(Error::invalid(
            "calibration needs at least one fault-free run",
        ));
    }
    if let Some(t) = traces.iter().find(|t| t.faulty) {
        return Err(Error::invalid(format!(
            "calibration run {:?} contains a fault",
            t.id
        )));
    }
    let (mut dv, mut dt) = (0.0_f64, 0.0_f64);
    for t in traces {
        for r in &t.residuals {
            dv = dv.max(r.r_v.abs());
            dt = dt.max(r.r_t.abs());
        }
    }
    if !(dv > 0.0 && dt > 0.0) {
        return Err(Error::invalid(
            "calibration residuals are identically zero on a channel",
        ));
    }
    Ok(Thresholds {
        delta_v: dv,
        delta_t: dt,
        provenance: traces.iter().map(|t| t.id.clone()).collect(),
    })
}

/// Optional debouncing: raise an alarm once `k` of the last `n` samples
/// exceed the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persistence {
    pub k: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultDecision {
    pub t: Vec<f64>,
    /// `|r_V| > δ_V` per sample.
    pub voltage: Vec<bool>,
    /// `|r_T| > δ_T` per sample.
    pub thermal: Vec<bool>,
    /// Alarm times after the optional persistence filter.
    pub first_voltage: Option<f64>,
    pub first_thermal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persistence: Option<Persistence>,
}

impl FaultDecision {
    pub fn any_fault(&self) -> bool {
        self.first_voltage.is_some() || self.first_thermal.is_some()
    }

    pub fn flag_count(&self) -> (usize, usize) {
        (
            self.voltage.iter().filter(|f| **f).count(),
            self.thermal.iter().filter(|f| **f).count(),
        )
    }

    /// Alarm sample indices after filtering.
    pub fn alarms(&self, voltage: bool) -> Vec<bool> {
        let flags = if voltage {
            &self.voltage
        } else {
            &self.thermal
        };
        filtered(flags, self.persistence)
    }
}

fn filtered(flags: &[bool], persistence: Option<Persistence>) -> Vec<bool> {
    match persistence {
        None => flags.to_vec(),
        Some(Persistence { k, n }) => {
            let mut out = vec![false; flags.len()];
            let mut count = 0usize;
            for i in 0..flags.len() {
                count += flags[i] as usize;
                if i >= n {
                    count -= flags[i - n] as usize;
                }
                out[i] = count >= k;
            }
            out
        }
    }
}

pub fn decide(
    residuals: &[Residuals],
    thresholds: &Thresholds,
    persistence: Option<Persistence>,
) -> FaultDecision {
    let t: Vec<f64> = residuals.iter().map(|r| r.t).collect();
    let voltage: Vec<bool> = residuals
        .iter()
        .map(|r| r.r_v.abs() > thresholds.delta_v)
        .collect();
    let thermal: Vec<bool> = residuals
        .iter()
        .map(|r| r.r_t.abs() > thresholds.delta_t)
        .collect();
    let first = |flags: &[bool]| {
        filtered(flags, persistence)
            .iter()
            .position(|f| *f)
            .map(|i| t[i])
    };
    FaultDecision {
        first_voltage: first(&voltage),
        first_thermal: first(&thermal),
        t,
        voltage,
        thermal,
        persistence,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    /// First alarm at or after onset, relative to onset (s).
    pub latency: Option<f64>,
    /// First alarm before onset, if any (absolute time, s).
    pub false_alarm: Option<f64>,
}

impl Latency {
    pub fn detected(&self) -> bool {
        self.latency.is_some()
    }
}

/// Detection delay on one channel relative to `onset`.
pub fn latency(decision: &FaultDecision, voltage: bool, onset: f64) -> Latency {
    let alarms = decision.alarms(voltage);
    let mut out = Latency {
        latency: None,
        false_alarm: None,
    };
    for (t, a) in decision.t.iter().zip(&alarms) {
        if !a {
            continue;
        }
        if *t < onset {
            out.false_alarm.get_or_insert(*t);
        } else {
            out.latency = Some(t - onset);
            break;
        }
    }
    out
}

//! Charging and load protocols.
//!
//! Current is positive on discharge. Charge-oriented protocols take current
//! magnitudes and apply the sign internally.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VOLTAGE_LIMIT_RANGE: (f64, f64) = (2.5, 4.2);

fn default_max_current() -> f64 {
    4.0
}

fn default_max_steps() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    /// Charge current magnitude (A).
    pub current: f64,
    /// The stage ends once SOC reaches this value.
    pub until_soc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Fixed signed current.
    ConstantCurrent { current: f64 },
    /// Constant-current charge to a voltage limit, then constant-voltage
    /// charge until the current magnitude falls to the cutoff, then an
    /// optional rest at zero current.
    Cccv {
        charge_current: f64,
        voltage_limit: f64,
        cutoff_current: f64,
        #[serde(default)]
        rest: f64,
    },
    /// Stepped constant-current charge.
    FastChargeProfile { stages: Vec<Stage> },
    /// Signed currents read from a two-column `t,I` CSV, one per sample.
    CsvReplay {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        currents: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    #[serde(flatten)]
    pub kind: ProtocolKind,
    /// Stop once this much time has elapsed (s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    /// Stop once SOC reaches this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soc_stop: Option<f64>,
    #[serde(default = "default_max_current")]
    pub max_current: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl Protocol {
    pub fn new(kind: ProtocolKind) -> Self {
        Self {
            kind,
            duration: None,
            soc_stop: None,
            max_current: default_max_current(),
            max_steps: default_max_steps(),
        }
    }

    pub fn constant_current(current: f64) -> Self {
        Self::new(ProtocolKind::ConstantCurrent { current })
    }

    pub fn cccv(charge_current: f64, voltage_limit: f64, cutoff_current: f64, rest: f64) -> Self {
        Self::new(ProtocolKind::Cccv {
            charge_current,
            voltage_limit,
            cutoff_current,
            rest,
        })
    }

    pub fn replay(currents: Vec<f64>) -> Self {
        Self::new(ProtocolKind::CsvReplay {
            path: None,
            currents,
        })
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = Some(duration);
        self
    }

    pub fn with_soc_stop(mut self, soc: f64) -> Self {
        self.soc_stop = Some(soc);
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    /// Loads replay currents from `path` (relative to `base`) if needed.
    pub fn resolve(&mut self, base: Option<&Path>) -> Result<()> {
        if let ProtocolKind::CsvReplay {
            path: Some(p),
            currents,
        } = &mut self.kind
        {
            if currents.is_empty() {
                let full = match base {
                    Some(b) if Path::new(p.as_str()).is_relative() => b.join(p.as_str()),
                    _ => Path::new(p.as_str()).to_path_buf(),
                };
                *currents = read_current_profile(&full)?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let imax = self.max_current.abs();
        let check_i = |i: f64, what: &str| -> Result<()> {
            if !i.is_finite() || i.abs() > imax {
                return Err(Error::config(format!(
                    "{what} {i} A outside [-{imax}, {imax}] A"
                )));
            }
            Ok(())
        };
        match &self.kind {
            ProtocolKind::ConstantCurrent { current } => check_i(*current, "current")?,
            ProtocolKind::Cccv {
                charge_current,
                voltage_limit,
                cutoff_current,
                rest,
            } => {
                check_i(*charge_current, "charge current")?;
                let (lo, hi) = VOLTAGE_LIMIT_RANGE;
                if !(*voltage_limit >= lo && *voltage_limit <= hi) {
                    return Err(Error::config(format!(
                        "voltage limit {voltage_limit} V outside [{lo}, {hi}] V"
                    )));
                }
                if !(*cutoff_current > 0.0 && *cutoff_current < charge_current.abs()) {
                    return Err(Error::config(
                        "cutoff current must be positive and below the charge current",
                    ));
                }
                if !(*rest >= 0.0) {
                    return Err(Error::config("rest must be non-negative"));
                }
            }
            ProtocolKind::FastChargeProfile { stages } => {
                if stages.is_empty() {
                    return Err(Error::config(
                        "fast charge profile needs at least one stage",
                    ));
                }
                for s in stages {
                    check_i(s.current, "stage current")?;
                }
                if stages
                    .windows(2)
                    .any(|w| !(w[1].until_soc > w[0].until_soc))
                {
                    return Err(Error::config("stage SOC limits must increase"));
                }
            }
            ProtocolKind::CsvReplay { path, currents } => {
                if currents.is_empty() && path.is_none() {
                    return Err(Error::config("csv replay needs a path or currents"));
                }
                for &i in currents {
                    check_i(i, "replay current")?;
                }
            }
        }
        if let Some(d) = self.duration {
            if !(d >= 0.0) {
                return Err(Error::config("duration must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Reads the current column of a `t,I` CSV.
pub fn read_current_profile(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Config {
                line: Some(i + 2),
                msg: format!("expected columns t,I, found {} fields", rec.len()),
            });
        }
        let v = rec[1].parse::<f64>().map_err(|e| Error::Config {
            line: Some(i + 2),
            msg: format!("bad current {:?}: {e}", &rec[1]),
        })?;
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip() {
        let p = Protocol::cccv(4.0, 4.2, 0.15, 600.0).with_duration(10.0);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"kind\":\"cccv\""));
        let q: Protocol = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_out_of_range_limits() {
        assert!(Protocol::cccv(4.0, 4.5, 0.1, 0.0).validate().is_err());
        assert!(Protocol::constant_current(-6.0).validate().is_err());
        assert!(Protocol::cccv(4.0, 4.2, 0.1, 0.0).validate().is_ok());
    }
}

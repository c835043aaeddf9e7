//! Campaigns: independent scenarios run on a bounded worker pool, with
//! amplitude sweeps and minimum-detectable-amplitude bisection.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{atomic_write, read_json, write_json};
use crate::scenario::{summarize, Bisection, OutcomeSummary, Scenario, SweepTarget};

pub const CAMPAIGN_SCHEMA: &str = "cellguard.campaign/1";
pub const SUMMARY_SCHEMA: &str = "cellguard.campaign-summary/1";

fn campaign_schema() -> String {
    CAMPAIGN_SCHEMA.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioEntry {
    Path(PathBuf),
    Inline(Box<Scenario>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    #[serde(default = "campaign_schema")]
    pub schema: String,
    pub name: String,
    #[serde(default)]
    pub scenarios: Vec<ScenarioEntry>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub detected: bool,
    pub voltage_latency: Option<f64>,
    pub thermal_latency: Option<f64>,
    pub voltage_false_alarms: usize,
    pub thermal_false_alarms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub name: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<OutcomeSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepPoint>,
    /// Smallest swept value found detected by bisection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_detectable: Option<f64>,
    /// Largest value found undetected by bisection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_undetected: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub schema: String,
    pub name: String,
    pub rows: Vec<ScenarioRow>,
    pub failed: usize,
}

impl Campaign {
    pub fn load(path: &Path) -> Result<Self> {
        let mut c: Campaign = read_json(path)?;
        if c.schema != CAMPAIGN_SCHEMA {
            return Err(Error::config(format!(
                "unsupported campaign schema {:?}",
                c.schema
            )));
        }
        c.base_dir = path.parent().map(Path::to_path_buf);
        Ok(c)
    }

    fn resolve(&self, entry: &ScenarioEntry) -> (String, Result<Scenario>) {
        match entry {
            ScenarioEntry::Path(p) => {
                let full = match &self.base_dir {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                (full.display().to_string(), Scenario::load(&full))
            }
            ScenarioEntry::Inline(s) => {
                let mut s = (**s).clone();
                s.base_dir = self.base_dir.clone();
                let r = s.validate().map(|_| s.clone());
                (s.name.clone(), r)
            }
        }
    }
}

/// Scenario with one swept quantity set to `value`.
pub fn apply_sweep(base: &Scenario, target: &SweepTarget, value: f64) -> Result<Scenario> {
    let mut s = base.clone();
    match target {
        SweepTarget::ThermalPower => {
            let f = s
                .fault
                .thermal
                .as_mut()
                .ok_or_else(|| Error::config("thermal_power sweep needs a thermal fault"))?;
            f.power = value;
        }
        SweepTarget::VoltageScale => {
            let f = s
                .fault
                .voltage
                .as_mut()
                .ok_or_else(|| Error::config("voltage_scale sweep needs a voltage fault"))?;
            f.a1 *= value;
            f.a2 *= value;
        }
        SweepTarget::ParameterError { key } => {
            s.uncertainty.parameter_errors.insert(key.clone(), value);
        }
        SweepTarget::SmoothVoltage => {
            s.uncertainty.voltage.smooth_amplitude = value;
        }
    }
    s.validate()?;
    Ok(s)
}

/// Whether the swept value also changes the training cycles. Faults and
/// truth-model parameter errors appear only in the detection cycle.
fn affects_training(target: &SweepTarget) -> bool {
    matches!(target, SweepTarget::SmoothVoltage)
}

fn detected(target: &SweepTarget, o: &OutcomeSummary) -> bool {
    match target {
        SweepTarget::ThermalPower => o.thermal_latency.is_some(),
        SweepTarget::VoltageScale => o.voltage_latency.is_some(),
        // Without an injected fault every alarm counts.
        SweepTarget::ParameterError { .. } | SweepTarget::SmoothVoltage => {
            o.voltage_latency.is_some() || o.thermal_latency.is_some() || o.any_false_alarm()
        }
    }
}

/// Runs one scenario with its sweep and bisection. Learning and thresholds
/// are computed once unless the swept quantity changes the training cycles.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioRow> {
    let setup = s.detection_setup()?;
    let models = s.learn(&setup)?;
    let thresholds = s.thresholds(&setup, &models)?;
    let outcome_of = |v: &Scenario| -> Result<OutcomeSummary> {
        let rec = v.simulate()?;
        if let Some(sw) = &s.sweep {
            if affects_training(&sw.target) {
                let m = v.learn(&setup)?;
                let th = v.thresholds(&setup, &m)?;
                let (r, d) = setup.detect(&rec, &m, &th, v.persistence)?;
                return Ok(summarize(&d, &r, v.onset()));
            }
        }
        let (r, d) = setup.detect(&rec, &models, &thresholds, v.persistence)?;
        Ok(summarize(&d, &r, v.onset()))
    };
    let mut row = ScenarioRow {
        name: s.name.clone(),
        ok: true,
        error: None,
        outcome: Some(outcome_of(s)?),
        sweep: Vec::new(),
        min_detectable: None,
        max_undetected: None,
    };
    let Some(sweep) = &s.sweep else {
        return Ok(row);
    };
    let point = |value: f64| -> Result<SweepPoint> {
        let o = outcome_of(&apply_sweep(s, &sweep.target, value)?)?;
        Ok(SweepPoint {
            value,
            detected: detected(&sweep.target, &o),
            voltage_latency: o.voltage_latency,
            thermal_latency: o.thermal_latency,
            voltage_false_alarms: o.voltage_false_alarms,
            thermal_false_alarms: o.thermal_false_alarms,
        })
    };
    for &v in &sweep.values {
        row.sweep.push(point(v)?);
    }
    if let Some(b) = &sweep.bisection {
        let (lo, hi) = bisect(b, |v| Ok(point(v)?.detected))?;
        row.max_undetected = lo;
        row.min_detectable = hi;
    }
    Ok(row)
}

/// Narrows `[lo, hi]` around the detection boundary until it is at most
/// `tol` wide. Returns `(largest undetected, smallest detected)`; either is
/// `None` when the corresponding endpoint does not behave as assumed.
pub fn bisect<F>(b: &Bisection, mut detected: F) -> Result<(Option<f64>, Option<f64>)>
where
    F: FnMut(f64) -> Result<bool>,
{
    if !(b.lo < b.hi && b.tol > 0.0) {
        return Err(Error::config("bisection needs lo < hi and tol > 0"));
    }
    let lo_det = detected(b.lo)?;
    let hi_det = detected(b.hi)?;
    match (lo_det, hi_det) {
        (true, _) => return Ok((None, Some(b.lo))),
        (false, false) => return Ok((Some(b.hi), None)),
        _ => {}
    }
    let (mut lo, mut hi) = (b.lo, b.hi);
    while hi - lo > b.tol {
        let mid = 0.5 * (lo + hi);
        if detected(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((Some(lo), Some(hi)))
}

/// Runs every scenario on a pool of `workers` threads (0 uses all cores).
/// Failing scenarios are recorded in their row; rows keep campaign order.
pub fn run_campaign(c: &Campaign, workers: usize) -> Result<CampaignSummary> {
    let resolved: Vec<(String, Result<Scenario>)> =
        c.scenarios.iter().map(|e| c.resolve(e)).collect();
    let mut seen = BTreeSet::new();
    for (_, s) in &resolved {
        if let Ok(s) = s {
            if !seen.insert(s.name.clone()) {
                return Err(Error::config(format!(
                    "scenario name {:?} appears twice in campaign {:?}",
                    s.name, c.name
                )));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let rows: Vec<ScenarioRow> = pool.install(|| {
        resolved
            .par_iter()
            .map(|(label, s)| {
                let r = s
                    .as_ref()
                    .map_err(|e| e.to_string())
                    .and_then(|s| run_scenario(s).map_err(|e| e.to_string()));
                r.unwrap_or_else(|msg| ScenarioRow {
                    name: match s {
                        Ok(s) => s.name.clone(),
                        Err(_) => label.clone(),
                    },
                    ok: false,
                    error: Some(msg),
                    outcome: None,
                    sweep: Vec::new(),
                    min_detectable: None,
                    max_undetected: None,
                })
            })
            .collect()
    });
    let failed = rows.iter().filter(|r| !r.ok).count();
    Ok(CampaignSummary {
        schema: SUMMARY_SCHEMA.to_string(),
        name: c.name.clone(),
        rows,
        failed,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_else(|| "-".into())
}

/// Aligned plain-text rendering of a summary.
pub fn summary_table(s: &CampaignSummary) -> String {
    let header = [
        "scenario",
        "status",
        "V latency (s)",
        "T latency (s)",
        "V false alarms",
        "T false alarms",
        "max undetected",
        "min detectable",
        "sweep points",
    ];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
    for r in &s.rows {
        let o = r.outcome.as_ref();
        rows.push(vec![
            r.name.clone(),
            if r.ok { "ok".into() } else { "error".into() },
            opt(o.and_then(|o| o.voltage_latency)),
            opt(o.and_then(|o| o.thermal_latency)),
            o.map(|o| o.voltage_false_alarms.to_string())
                .unwrap_or("-".into()),
            o.map(|o| o.thermal_false_alarms.to_string())
                .unwrap_or("-".into()),
            opt(r.max_undetected),
            opt(r.min_detectable),
            r.sweep.len().to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|j| rows.iter().map(|r| r[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &rows {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    for r in s.rows.iter().filter(|r| !r.ok) {
        out.push_str(&format!(
            "error in {}: {}\n",
            r.name,
            r.error.as_deref().unwrap_or("")
        ));
    }
    out
}

/// Writes `summary.json` and `summary.txt` into `dir` atomically.
pub fn write_summary(dir: &Path, s: &CampaignSummary) -> Result<()> {
    write_json(&dir.join("summary.json"), s)?;
    atomic_write(&dir.join("summary.txt"), summary_table(s).as_bytes())
}

//! Shipped fault scenarios with the default thresholds.

use cellguard::campaign::run_scenario;
use cellguard::scenario::{OutcomeSummary, Scenario};

use crate::{fail, scenarios_dir, Check};

fn outcome(name: &str) -> Result<OutcomeSummary, String> {
    let s = Scenario::load(&scenarios_dir().join(format!("{name}.json"))).map_err(fail)?;
    let th = (0.01, 0.5);
    match &s.thresholds {
        cellguard::scenario::ThresholdSource::Fixed { delta_v, delta_t }
            if (*delta_v, *delta_t) == th => {}
        other => {
            return Err(format!(
                "{name} does not use the default thresholds: {other:?}"
            ))
        }
    }
    let row = run_scenario(&s).map_err(fail)?;
    row.outcome
        .ok_or_else(|| format!("{name} produced no outcome"))
}

pub fn check() -> Check {
    let mut latencies = Vec::new();
    for case in 1..=3 {
        let o = outcome(&format!("voltage_fault_case{case}"))?;
        if o.any_false_alarm() {
            return Err(format!("case {case} raised alarms before onset"));
        }
        latencies.push(
            o.voltage_latency
                .ok_or_else(|| format!("voltage fault case {case} undetected"))?,
        );
    }
    if !latencies.windows(2).all(|w| w[1] < w[0]) {
        return Err(format!("latencies {latencies:?} not strictly decreasing"));
    }
    let mut thermal = Vec::new();
    for (power, expect) in [(310, true), (220, true), (100, false)] {
        let o = outcome(&format!("thermal_fault_{power}w"))?;
        if o.any_false_alarm() {
            return Err(format!("{power} W scenario raised alarms before onset"));
        }
        if o.thermal_latency.is_some() != expect {
            return Err(format!(
                "{power} W thermal fault detected = {}, expected {expect}",
                o.thermal_latency.is_some()
            ));
        }
        thermal.push((power, o.thermal_latency));
    }
    let s = Scenario::load(&scenarios_dir().join("thermal_min_detectable.json")).map_err(fail)?;
    let row = run_scenario(&s).map_err(fail)?;
    let min = row
        .min_detectable
        .ok_or("bisection found no detectable amplitude")?;
    if !(min > 100.0 && min < 310.0) {
        return Err(format!(
            "minimum detectable amplitude {min} W outside (100, 310)"
        ));
    }
    Ok(format!(
        "voltage latencies {latencies:?} s; thermal {thermal:?}; minimum detectable {min:.2} W \
         (largest undetected {:.2} W)",
        row.max_undetected.unwrap_or(f64::NAN)
    ))
}

//! Injected voltage and thermal faults.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Plating-like voltage bump `a1·exp(−½(x1−μ)) + a2·sin(x2)` where `x1`
/// ramps from −π to π and `x2` from π/3 to π across the active window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageFault {
    pub a1: f64,
    pub a2: f64,
    #[serde(default)]
    pub mu: f64,
    /// `[t_on, t_off]` in seconds, inclusive.
    pub window: [f64; 2],
    /// Linear onset envelope length (s); zero applies the full shape at once.
    #[serde(default)]
    pub rise_time: f64,
    /// Square the exponent argument, giving a Gaussian bump.
    #[serde(default)]
    pub gaussian_bump: bool,
}

/// Heater-like volumetric power over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalFault {
    /// Watts.
    pub power: f64,
    pub window: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage: Option<VoltageFault>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal: Option<ThermalFault>,
}

fn check_window(w: [f64; 2], what: &str) -> Result<()> {
    if !(w[0] < w[1]) || !w[0].is_finite() || !w[1].is_finite() {
        return Err(Error::config(format!(
            "{what} window must satisfy t_on < t_off, got [{}, {}]",
            w[0], w[1]
        )));
    }
    Ok(())
}

impl FaultConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.voltage.is_none() && self.thermal.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(v) = &self.voltage {
            check_window(v.window, "voltage fault")?;
            if !(v.a1 >= 0.0 && v.a2 >= 0.0) {
                return Err(Error::config(
                    "voltage fault amplitudes must be non-negative",
                ));
            }
            if !(v.rise_time >= 0.0) {
                return Err(Error::config("rise_time must be non-negative"));
            }
        }
        if let Some(t) = &self.thermal {
            check_window(t.window, "thermal fault")?;
            if !(t.power >= 0.0) {
                return Err(Error::config("thermal fault power must be non-negative"));
            }
        }
        Ok(())
    }

    /// Earliest configured onset.
    pub fn onset(&self) -> Option<f64> {
        let v = self.voltage.as_ref().map(|v| v.window[0]);
        let t = self.thermal.as_ref().map(|t| t.window[0]);
        match (v, t) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn voltage_signal(&self, t: f64) -> f64 {
        self.voltage
            .as_ref()
            .map_or(0.0, |v| voltage_fault_signal(t, v))
    }

    pub fn thermal_power(&self, t: f64) -> f64 {
        match &self.thermal {
            Some(f) if t >= f.window[0] && t <= f.window[1] => f.power,
            _ => 0.0,
        }
    }
}

pub fn voltage_fault_signal(t: f64, f: &VoltageFault) -> f64 {
    let [on, off] = f.window;
    if t < on || t > off {
        return 0.0;
    }
    let s = (t - on) / (off - on);
    let x1 = -PI + 2.0 * PI * s;
    let x2 = PI / 3.0 + 2.0 * PI / 3.0 * s;
    let arg = if f.gaussian_bump {
        (x1 - f.mu) * (x1 - f.mu)
    } else {
        x1 - f.mu
    };
    let shape = f.a1 * (-0.5 * arg).exp() + f.a2 * x2.sin();
    let envelope = if f.rise_time > 0.0 {
        ((t - on) / f.rise_time).min(1.0)
    } else {
        1.0
    };
    envelope * shape
}

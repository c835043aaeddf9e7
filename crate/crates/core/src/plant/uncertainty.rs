//! Sensor errors and model mismatch injected into the truth model.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CellParams;

/// Corner frequency of the band-limited noise component (Hz).
pub const BAND_CUTOFF_HZ: f64 = 0.01;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VoltageUncertainty {
    /// White sensor noise standard deviation (V).
    pub noise_std: f64,
    pub bias: f64,
    /// Linear drift (V/s).
    pub drift_rate: f64,
    /// Stationary standard deviation of the low-pass filtered noise (V).
    pub band_std: f64,
    /// Fractional resistance growth per cycle index.
    pub resistance_growth: f64,
    /// Amplitude of a smooth SOC-dependent voltage error `A·sin(3π·SOC)` (V).
    pub smooth_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermalUncertainty {
    /// White sensor noise standard deviation (K).
    pub noise_std: f64,
    pub bias: f64,
    pub band_std: f64,
    /// Multiplier on the true convection coefficient.
    pub convection_factor: f64,
    /// Entropic heat amplitude at 4 A, `A·(I/4)·cos(2π·SOC)` (W).
    pub reversible_heat_amplitude: f64,
}

impl Default for ThermalUncertainty {
    fn default() -> Self {
        Self {
            noise_std: 0.0,
            bias: 0.0,
            band_std: 0.0,
            convection_factor: 1.0,
            reversible_heat_amplitude: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UncertaintyConfig {
    pub voltage: VoltageUncertainty,
    pub thermal: ThermalUncertainty,
    /// Relative errors of the truth model's parameters against the nominal
    /// set, keyed by config name. The anode specific area `a_a` only enters
    /// the model multiplied by `A_a`, so its error is applied there.
    pub parameter_errors: BTreeMap<String, f64>,
}

impl UncertaintyConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.voltage;
        let t = &self.thermal;
        for (name, x) in [
            ("voltage noise_std", v.noise_std),
            ("voltage band_std", v.band_std),
            ("thermal noise_std", t.noise_std),
            ("thermal band_std", t.band_std),
        ] {
            if !(x >= 0.0) {
                return Err(Error::config(format!("{name} must be non-negative")));
            }
        }
        if !(t.convection_factor > 0.0) {
            return Err(Error::config("convection_factor must be positive"));
        }
        for (k, e) in &self.parameter_errors {
            if !(e.is_finite() && *e > -1.0) {
                return Err(Error::config(format!(
                    "parameter error for {k} must exceed -1"
                )));
            }
        }
        Ok(())
    }

    /// The truth model's parameters for a given cycle.
    pub fn plant_params(&self, nominal: &CellParams, cycle_index: usize) -> Result<CellParams> {
        let mut p = nominal.clone();
        for (key, err) in &self.parameter_errors {
            let target = if key == "a_a" { "A_a" } else { key.as_str() };
            let base = p
                .get(target)
                .ok_or_else(|| Error::config(format!("unknown parameter {key:?}")))?;
            p.set(target, base * (1.0 + err))?;
        }
        p.R_b *= (1.0 + self.voltage.resistance_growth).powi(cycle_index as i32);
        p.h_conv *= self.thermal.convection_factor;
        p.validate()?;
        Ok(p)
    }
}

/// First-order low-pass filtered Gaussian noise with unit-free stationary
/// standard deviation `std`.
#[derive(Debug, Clone)]
struct BandNoise {
    pole: f64,
    std: f64,
    x: f64,
}

impl BandNoise {
    fn new(std: f64, dt: f64) -> Self {
        Self {
            pole: (-2.0 * PI * BAND_CUTOFF_HZ * dt).exp(),
            std,
            x: 0.0,
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let out = self.x;
        let n: f64 = rng.sample(StandardNormal);
        self.x = self.pole * self.x + (1.0 - self.pole * self.pole).sqrt() * self.std * n;
        out
    }
}

/// Stateful generator of the voltage and temperature error channels.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    cfg: UncertaintyConfig,
    rng: ChaCha8Rng,
    band_v: BandNoise,
    band_t: BandNoise,
}

impl NoiseSource {
    pub fn new(cfg: &UncertaintyConfig, rng: ChaCha8Rng, dt: f64) -> Self {
        let mut rng = rng;
        let mut band_v = BandNoise::new(cfg.voltage.band_std, dt);
        let mut band_t = BandNoise::new(cfg.thermal.band_std, dt);
        // Start both filters in their stationary distribution.
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        band_v.x = a * cfg.voltage.band_std;
        band_t.x = b * cfg.thermal.band_std;
        Self {
            cfg: cfg.clone(),
            rng,
            band_v,
            band_t,
        }
    }

    /// Voltage and temperature sensor error at time `t` and state of charge
    /// `soc`. Draws a fixed number of variates per call.
    pub fn sample(&mut self, t: f64, soc: f64) -> (f64, f64) {
        let v = &self.cfg.voltage;
        let th = &self.cfg.thermal;
        let nv: f64 = self.rng.sample(StandardNormal);
        let nt: f64 = self.rng.sample(StandardNormal);
        let bv = self.band_v.next(&mut self.rng);
        let bt = self.band_t.next(&mut self.rng);
        let wv = v.bias
            + v.drift_rate * t
            + bv
            + v.noise_std * nv
            + v.smooth_amplitude * (3.0 * PI * soc).sin();
        let wt = th.bias + bt + th.noise_std * nt;
        (wv, wt)
    }

    pub fn reversible_heat(&self, current: f64, soc: f64) -> f64 {
        self.cfg.thermal.reversible_heat_amplitude * (current / 4.0) * (2.0 * PI * soc).cos()
    }
}

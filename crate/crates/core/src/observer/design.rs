//! Observer gain synthesis by pole placement.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues_real_desc, place_poles};
use crate::model::StateSpace;

/// Gain `L` placing the eigenvalues of `A − L·Cᵀ` at `spectrum`.
pub fn design_gain(a: &DMatrix<f64>, c: &DVector<f64>, spectrum: &[f64]) -> Result<DVector<f64>> {
    if let Some(s) = spectrum.iter().find(|s| !(s.abs() < 1.0)) {
        return Err(Error::config(format!(
            "requested closed-loop eigenvalue {s} is not inside the unit disk"
        )));
    }
    place_poles(a, c, spectrum)
}

/// Keeps the open-loop eigenvalues below `cap` and moves the slower ones
/// to `cap, cap − 0.01, cap − 0.02, …`.
pub fn capped_spectrum(a: &DMatrix<f64>, cap: f64) -> Vec<f64> {
    let mut moved = 0;
    eigenvalues_real_desc(a)
        .into_iter()
        .map(|ev| {
            if ev > cap {
                let s = cap - 0.01 * moved as f64;
                moved += 1;
                s
            } else {
                ev
            }
        })
        .collect()
}

/// How each observer's closed-loop spectrum is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SpectrumChoice {
    /// Open-loop spectrum with the slow modes capped.
    Capped { cap: f64 },
    /// Explicit eigenvalues, one per state.
    Explicit { eigenvalues: Vec<f64> },
}

impl SpectrumChoice {
    pub fn resolve(&self, a: &DMatrix<f64>) -> Vec<f64> {
        match self {
            SpectrumChoice::Capped { cap } => capped_spectrum(a, *cap),
            SpectrumChoice::Explicit { eigenvalues } => eigenvalues.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObserverDesign {
    pub voltage: SpectrumChoice,
    pub thermal: SpectrumChoice,
}

impl Default for ObserverDesign {
    fn default() -> Self {
        Self {
            voltage: SpectrumChoice::Capped { cap: 0.995 },
            thermal: SpectrumChoice::Capped { cap: 0.88 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverGains {
    pub voltage: Vec<f64>,
    pub thermal: Vec<f64>,
}

impl ObserverGains {
    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            voltage: vec![0.0; n],
            thermal: vec![0.0; m],
        }
    }

    pub fn voltage_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.voltage)
    }

    pub fn thermal_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.thermal)
    }

    pub fn design(ss: &StateSpace, design: &ObserverDesign) -> Result<Self> {
        let lv = design_gain(&ss.a1, &ss.c1, &design.voltage.resolve(&ss.a1))?;
        let lt = design_gain(&ss.a2, &ss.c2, &design.thermal.resolve(&ss.a2))?;
        Ok(Self {
            voltage: lv.iter().copied().collect(),
            thermal: lt.iter().copied().collect(),
        })
    }
}

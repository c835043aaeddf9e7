//! State of charge and spatial averages.
//!
//! The discretized diffusion operator conserves the shell-weighted sum
//! `Σ i² c_i`, so that weighted mean defines the bulk stoichiometry.
//! Likewise the thermal shells are weighted by `j` for the volume average.

use nalgebra::DVector;

use super::discretize::electrochemical_generator;
use super::CellParams;

/// Shell weights `i²` of the concentration nodes.
pub fn mass_weights(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| ((i + 1) * (i + 1)) as f64)
}

/// Shell weights `j` of the temperature nodes.
pub fn volume_weights(m: usize) -> DVector<f64> {
    DVector::from_fn(m, |j, _| (j + 1) as f64)
}

pub fn average_temperature(z2: &DVector<f64>) -> f64 {
    let w = volume_weights(z2.len());
    w.dot(z2) / w.sum()
}

pub fn mean_stoichiometry(params: &CellParams, z1: &DVector<f64>) -> f64 {
    let w = mass_weights(z1.len());
    w.dot(z1) / w.sum() / params.c_max_a
}

/// Rate of change of the weighted mean concentration per ampere of
/// charging current (mol/m³ per A·s).
pub fn charge_rate(params: &CellParams) -> f64 {
    let (_, b) = electrochemical_generator(params);
    let w = mass_weights(params.N);
    -w[params.N - 1] * b[params.N - 1] / w.sum()
}

/// Mean anode stoichiometry at 0% and 100% SOC.
pub fn stoichiometry_span(params: &CellParams) -> (f64, f64) {
    let lo = params.theta_a_empty;
    let delta = charge_rate(params) * params.capacity_ah * 3600.0 / params.c_max_a;
    (lo, lo + delta)
}

pub fn soc(params: &CellParams, z1: &DVector<f64>) -> f64 {
    let (lo, hi) = stoichiometry_span(params);
    (mean_stoichiometry(params, z1) - lo) / (hi - lo)
}

pub fn uniform_state_at_soc(params: &CellParams, soc: f64) -> DVector<f64> {
    let (lo, hi) = stoichiometry_span(params);
    DVector::from_element(params.N, (lo + soc * (hi - lo)) * params.c_max_a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_state_roundtrips_soc() {
        let p = CellParams::default();
        for s in [0.0, 0.25, 0.5, 0.8] {
            assert!((soc(&p, &uniform_state_at_soc(&p, s)) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn full_span_stays_inside_anode_map() {
        let p = CellParams::default();
        let (lo, hi) = stoichiometry_span(&p);
        let (a, b) = p.ocp_anode.domain();
        assert!(lo > a && hi < b, "{lo}..{hi} vs {a}..{b}");
    }

    #[test]
    fn average_of_uniform_profile() {
        let z = DVector::from_element(7, 301.5);
        assert!((average_temperature(&z) - 301.5).abs() < 1e-12);
    }
}

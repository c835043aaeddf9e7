//! Terminal voltage, heat generation and the linearized voltage map.
//!
//! Positive current discharges the cell. Both charge-transfer
//! overpotentials oppose the current, so the terminal voltage drops below
//! the open-circuit value on discharge and rises above it on charge.

use nalgebra::DVector;

use super::{CellParams, Electrode};
use crate::error::{Error, Result};

/// Anode and cathode surface stoichiometries for a surface concentration.
pub fn surface_stoichiometry(p: &CellParams, c_surf: f64) -> (f64, f64) {
    (
        c_surf / p.c_max_a,
        (p.alpha1() * c_surf + p.alpha2()) / p.c_max_c,
    )
}

fn checked_stoichiometry(p: &CellParams, c_surf: f64) -> Result<(f64, f64)> {
    let (sa, sc) = surface_stoichiometry(p, c_surf);
    for (e, map, s) in [
        (Electrode::Anode, &p.ocp_anode, sa),
        (Electrode::Cathode, &p.ocp_cathode, sc),
    ] {
        if !map.contains(s) {
            let (lo, hi) = map.domain();
            return Err(Error::Domain {
                electrode: e,
                value: s,
                lo,
                hi,
            });
        }
    }
    Ok((sa, sc))
}

pub fn open_circuit_voltage(p: &CellParams, c_surf: f64) -> Result<f64> {
    let (sa, sc) = checked_stoichiometry(p, c_surf)?;
    Ok(p.ocp_cathode.value(sc) + p.ocp_anode.value(sa))
}

/// Open-circuit voltage with each surface stoichiometry saturated at the
/// ends of its map. Used where an estimate may transiently leave the
/// physical range.
pub fn open_circuit_voltage_saturated(p: &CellParams, c_surf: f64) -> f64 {
    let (sa, sc) = surface_stoichiometry(p, c_surf);
    let clamp = |map: &super::OcpMap, s: f64| {
        let (lo, hi) = map.domain();
        map.value(s.clamp(lo, hi))
    };
    clamp(&p.ocp_cathode, sc) + clamp(&p.ocp_anode, sa)
}

/// Total distance of both surface stoichiometries outside their map
/// domains; zero inside.
pub fn stoichiometry_excursion(p: &CellParams, c_surf: f64) -> f64 {
    let (sa, sc) = surface_stoichiometry(p, c_surf);
    let out = |map: &super::OcpMap, s: f64| {
        let (lo, hi) = map.domain();
        (lo - s).max(0.0) + (s - hi).max(0.0)
    };
    out(&p.ocp_anode, sa) + out(&p.ocp_cathode, sc)
}

fn kinetic_terms(p: &CellParams, temp: f64) -> [(f64, f64); 2] {
    let rt_f = p.R_gas * temp / p.F;
    [
        (rt_f / p.alpha_c, 2.0 * p.a_c() * p.A_c * p.L_c * p.i0_c),
        (rt_f / p.alpha_a, 2.0 * p.a_a() * p.A_a * p.L_a * p.i0_a),
    ]
}

/// Sum of both charge-transfer overpotentials; odd in `current`.
pub fn overpotential(p: &CellParams, current: f64, temp: f64) -> f64 {
    kinetic_terms(p, temp)
        .iter()
        .map(|(scale, i_ref)| scale * (current / i_ref).asinh())
        .sum()
}

/// `∂V/∂I` at fixed concentration.
pub fn voltage_current_slope(p: &CellParams, current: f64, temp: f64) -> f64 {
    -p.R_b
        - kinetic_terms(p, temp)
            .iter()
            .map(|(scale, i_ref)| {
                let u = current / i_ref;
                scale / (1.0 + u * u).sqrt() / i_ref
            })
            .sum::<f64>()
}

pub fn terminal_voltage(p: &CellParams, z1: &DVector<f64>, current: f64, temp: f64) -> Result<f64> {
    let c_surf = z1[z1.len() - 1];
    let ocv = open_circuit_voltage(p, c_surf)?;
    Ok(ocv - p.R_b * current - overpotential(p, current, temp))
}

/// Irreversible heat `I·(OCV − V)` (W).
pub fn heat_generation(
    p: &CellParams,
    z1: &DVector<f64>,
    current: f64,
    voltage: f64,
) -> Result<f64> {
    let ocv = open_circuit_voltage(p, z1[z1.len() - 1])?;
    Ok(current * (ocv - voltage))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub c1: DVector<f64>,
    pub d1: f64,
    pub offset: f64,
    /// An OCP derivative was taken at a table end point.
    pub one_sided: bool,
}

pub fn linearize_voltage(
    p: &CellParams,
    z1_op: &DVector<f64>,
    current: f64,
    temp: f64,
) -> Result<Linearization> {
    let n = z1_op.len();
    let c_surf = z1_op[n - 1];
    let (sa, sc) = checked_stoichiometry(p, c_surf)?;
    let (dua, ea) = p.ocp_anode.derivative(sa);
    let (duc, ec) = p.ocp_cathode.derivative(sc);
    let mut c1 = DVector::zeros(n);
    c1[n - 1] = p.alpha1() / p.c_max_c * duc + dua / p.c_max_a;
    let d1 = voltage_current_slope(p, current, temp);
    let v = terminal_voltage(p, z1_op, current, temp)?;
    let offset = v - c1[n - 1] * c_surf - d1 * current;
    Ok(Linearization {
        c1,
        d1,
        offset,
        one_sided: ea || ec,
    })
}

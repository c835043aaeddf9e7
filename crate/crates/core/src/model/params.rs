//! Cell parameters and their flat `name = value` configuration format.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::OcpMap;

const DEFAULT_CONFIG: &str = include_str!("../../data/cell_default.cfg");

/// Physical and geometric constants of the electrochemical-thermal model.
///
/// Field names follow the configuration keys; derived quantities (specific
/// areas, stoichiometric coupling, thermal mass) are methods so they can
/// never go stale after a field is edited.
#[derive(Debug, Clone, PartialEq)]
#[allow(non_snake_case)]
pub struct CellParams {
    /// Anode solid diffusion coefficient (m²/s).
    pub D: f64,
    /// Particle radius (m).
    pub X: f64,
    /// Cell radius (m).
    pub Y: f64,
    /// Electrochemical nodes.
    pub N: usize,
    /// Thermal nodes.
    pub M: usize,
    pub A_a: f64,
    pub A_c: f64,
    pub L_a: f64,
    pub L_c: f64,
    pub eps_a: f64,
    pub eps_c: f64,
    pub R_b: f64,
    pub m_Li: f64,
    pub alpha_a: f64,
    pub alpha_c: f64,
    pub i0_a: f64,
    pub i0_c: f64,
    pub c_max_a: f64,
    pub c_max_c: f64,
    pub rho: f64,
    pub C_p: f64,
    pub k_th: f64,
    pub h_conv: f64,
    pub V_b: f64,
    pub F: f64,
    pub R_gas: f64,
    pub dt: f64,
    /// Nominal capacity used to define SOC (Ah).
    pub capacity_ah: f64,
    /// Average anode stoichiometry at 0% SOC.
    pub theta_a_empty: f64,
    pub ocp_anode: OcpMap,
    pub ocp_cathode: OcpMap,
}

/// Scalar keys in config-file order.
pub const SCALAR_KEYS: &[&str] = &[
    "D",
    "X",
    "Y",
    "N",
    "M",
    "A_a",
    "A_c",
    "L_a",
    "L_c",
    "eps_a",
    "eps_c",
    "R_b",
    "m_Li",
    "alpha_a",
    "alpha_c",
    "i0_a",
    "i0_c",
    "c_max_a",
    "c_max_c",
    "rho",
    "C_p",
    "k_th",
    "h_conv",
    "V_b",
    "F",
    "R_gas",
    "dt",
    "capacity_ah",
    "theta_a_empty",
];

impl Default for CellParams {
    fn default() -> Self {
        Self::from_config_str(DEFAULT_CONFIG, None).expect("shipped default cell config is valid")
    }
}

impl CellParams {
    pub fn a_a(&self) -> f64 {
        3.0 * self.eps_a / self.X
    }

    pub fn a_c(&self) -> f64 {
        3.0 * self.eps_c / self.X
    }

    pub fn alpha1(&self) -> f64 {
        -(self.eps_a * self.A_a * self.L_a) / (self.eps_c * self.A_c * self.L_c)
    }

    pub fn alpha2(&self) -> f64 {
        self.m_Li / (self.eps_c * self.A_c * self.L_c)
    }

    /// ρ·C_p·V_b (J/K).
    pub fn thermal_mass(&self) -> f64 {
        self.rho * self.C_p * self.V_b
    }

    pub fn dx(&self) -> f64 {
        self.X / self.N as f64
    }

    pub fn dy(&self) -> f64 {
        self.Y / self.M as f64
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "D" => self.D,
            "X" => self.X,
            "Y" => self.Y,
            "N" => self.N as f64,
            "M" => self.M as f64,
            "A_a" => self.A_a,
            "A_c" => self.A_c,
            "L_a" => self.L_a,
            "L_c" => self.L_c,
            "eps_a" => self.eps_a,
            "eps_c" => self.eps_c,
            "R_b" => self.R_b,
            "m_Li" => self.m_Li,
            "alpha_a" => self.alpha_a,
            "alpha_c" => self.alpha_c,
            "i0_a" => self.i0_a,
            "i0_c" => self.i0_c,
            "c_max_a" => self.c_max_a,
            "c_max_c" => self.c_max_c,
            "rho" => self.rho,
            "C_p" => self.C_p,
            "k_th" | "k" => self.k_th,
            "h_conv" | "h" => self.h_conv,
            "V_b" => self.V_b,
            "F" => self.F,
            "R_gas" => self.R_gas,
            "dt" => self.dt,
            "capacity_ah" => self.capacity_ah,
            "theta_a_empty" => self.theta_a_empty,
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, v: f64) -> Result<()> {
        let node_count = |v: f64| -> Result<usize> {
            if v.fract() != 0.0 || v < 0.0 {
                return Err(Error::config(format!(
                    "{key} must be a non-negative integer"
                )));
            }
            Ok(v as usize)
        };
        match key {
            "D" => self.D = v,
            "X" => self.X = v,
            "Y" => self.Y = v,
            "N" => self.N = node_count(v)?,
            "M" => self.M = node_count(v)?,
            "A_a" => self.A_a = v,
            "A_c" => self.A_c = v,
            "L_a" => self.L_a = v,
            "L_c" => self.L_c = v,
            "eps_a" => self.eps_a = v,
            "eps_c" => self.eps_c = v,
            "R_b" => self.R_b = v,
            "m_Li" => self.m_Li = v,
            "alpha_a" => self.alpha_a = v,
            "alpha_c" => self.alpha_c = v,
            "i0_a" => self.i0_a = v,
            "i0_c" => self.i0_c = v,
            "c_max_a" => self.c_max_a = v,
            "c_max_c" => self.c_max_c = v,
            "rho" => self.rho = v,
            "C_p" => self.C_p = v,
            "k_th" | "k" => self.k_th = v,
            "h_conv" | "h" => self.h_conv = v,
            "V_b" => self.V_b = v,
            "F" => self.F = v,
            "R_gas" => self.R_gas = v,
            "dt" => self.dt = v,
            "capacity_ah" => self.capacity_ah = v,
            "theta_a_empty" => self.theta_a_empty = v,
            other => return Err(Error::config(format!("unknown cell parameter {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("D", self.D),
            ("X", self.X),
            ("Y", self.Y),
            ("A_a", self.A_a),
            ("A_c", self.A_c),
            ("L_a", self.L_a),
            ("L_c", self.L_c),
            ("rho", self.rho),
            ("C_p", self.C_p),
            ("k_th", self.k_th),
            ("h_conv", self.h_conv),
            ("V_b", self.V_b),
            ("dt", self.dt),
            ("m_Li", self.m_Li),
            ("alpha_a", self.alpha_a),
            ("alpha_c", self.alpha_c),
            ("i0_a", self.i0_a),
            ("i0_c", self.i0_c),
            ("c_max_a", self.c_max_a),
            ("c_max_c", self.c_max_c),
            ("F", self.F),
            ("R_gas", self.R_gas),
            ("capacity_ah", self.capacity_ah),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.R_b < 0.0 || !self.R_b.is_finite() {
            return Err(Error::config("R_b must be non-negative"));
        }
        for (name, v) in [("eps_a", self.eps_a), ("eps_c", self.eps_c)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if self.N < 2 || self.M < 2 {
            return Err(Error::config(format!(
                "node counts must be at least 2 (N = {}, M = {})",
                self.N, self.M
            )));
        }
        if !(0.0..1.0).contains(&self.theta_a_empty) {
            return Err(Error::config("theta_a_empty must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Parses the flat config format. OCP paths resolve relative to `base`.
    pub fn from_config_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut scalars: Vec<(usize, String, f64)> = Vec::new();
        let mut anode = None;
        let mut cathode = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: Some(lineno),
                msg: format!("expected `name = value`, found {line:?}"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            let at_line = |e: Error| match e {
                Error::Config { msg, .. } => Error::Config {
                    line: Some(lineno),
                    msg,
                },
                other => other,
            };
            match k {
                "ocp_anode" => anode = Some(OcpMap::resolve(v, base).map_err(at_line)?),
                "ocp_cathode" => cathode = Some(OcpMap::resolve(v, base).map_err(at_line)?),
                _ => {
                    let val = v.parse::<f64>().map_err(|e| Error::Config {
                        line: Some(lineno),
                        msg: format!("{k}: bad number {v:?}: {e}"),
                    })?;
                    scalars.push((lineno, k.to_string(), val));
                }
            }
        }
        let mut p = Self::blank(
            anode.map_or_else(|| OcpMap::builtin("graphite_v1"), Ok)?,
            cathode.map_or_else(|| OcpMap::builtin("nmc_v1"), Ok)?,
        );
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, k, v) in scalars {
            p.set(&k, v).map_err(|e| match e {
                Error::Config { msg, .. } => Error::Config {
                    line: Some(lineno),
                    msg,
                },
                other => other,
            })?;
            seen.insert(canonical_key(&k).to_string());
        }
        let missing: Vec<&str> = SCALAR_KEYS
            .iter()
            .copied()
            .filter(|k| !seen.contains(*k))
            .collect();
        if !missing.is_empty() {
            return Err(Error::config(format!(
                "missing keys: {}",
                missing.join(", ")
            )));
        }
        p.validate()?;
        Ok(p)
    }

    pub fn from_config_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text, path.parent())
    }

    /// Serializes with shortest round-trip float formatting.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        for k in SCALAR_KEYS {
            let v = self.get(k).expect("every listed key is readable");
            s.push_str(&format!("{k} = {v:?}\n"));
        }
        s.push_str(&format!("ocp_anode = {}\n", self.ocp_anode.source()));
        s.push_str(&format!("ocp_cathode = {}\n", self.ocp_cathode.source()));
        s
    }

    fn blank(ocp_anode: OcpMap, ocp_cathode: OcpMap) -> Self {
        Self {
            D: 0.0,
            X: 0.0,
            Y: 0.0,
            N: 0,
            M: 0,
            A_a: 0.0,
            A_c: 0.0,
            L_a: 0.0,
            L_c: 0.0,
            eps_a: 0.0,
            eps_c: 0.0,
            R_b: 0.0,
            m_Li: 0.0,
            alpha_a: 0.0,
            alpha_c: 0.0,
            i0_a: 0.0,
            i0_c: 0.0,
            c_max_a: 0.0,
            c_max_c: 0.0,
            rho: 0.0,
            C_p: 0.0,
            k_th: 0.0,
            h_conv: 0.0,
            V_b: 0.0,
            F: 0.0,
            R_gas: 0.0,
            dt: 0.0,
            capacity_ah: 0.0,
            theta_a_empty: 0.0,
            ocp_anode,
            ocp_cathode,
        }
    }
}

fn canonical_key(k: &str) -> &str {
    match k {
        "k" => "k_th",
        "h" => "h_conv",
        other => other,
    }
}

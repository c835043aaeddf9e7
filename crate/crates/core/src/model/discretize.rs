//! Method-of-lines discretization with forward Euler time stepping.
//!
//! Anode particle: `N` spherical shells of width `δx = X/N`, node `i` at
//! radius `i·δx`. Central differences of the spherical Laplacian give
//! `(1−1/i)γ c_{i−1} − 2γ c_i + (1+1/i)γ c_{i+1}` with `γ = D/δx²`. The
//! centre row uses the symmetry ghost and the surface row a first-order
//! ghost carrying the flux condition, which leaves every row summing to
//! zero.
//!
//! Cell body: `M` cylindrical shells of width `δy = Y/M` with
//! `γ = k/(ρ C_p δy²)` and curvature factors `1 ± 1/(2j)`. The surface ghost
//! applies Newton cooling with Biot number `δy·h/k`.

use nalgebra::{DMatrix, DVector};

use super::output::linearize_voltage;
use super::soc::uniform_state_at_soc;
use super::CellParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Electrochemical {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thermal {
    pub a: DMatrix<f64>,
    /// Ambient-temperature input column.
    pub b: DVector<f64>,
    /// Surface-node output row.
    pub c: DVector<f64>,
    /// Temperature rise per joule, applied to every node.
    pub heat_gain: f64,
}

/// Continuous-time diffusion generator and current input column.
pub fn electrochemical_generator(p: &CellParams) -> (DMatrix<f64>, DVector<f64>) {
    let n = p.N;
    let nf = n as f64;
    let g = p.D / (p.dx() * p.dx());
    let mut m = DMatrix::zeros(n, n);
    m[(0, 0)] = -2.0 * g;
    m[(0, 1)] = 2.0 * g;
    for i in 2..n {
        let r = i - 1;
        let fi = i as f64;
        m[(r, r - 1)] = (1.0 - 1.0 / fi) * g;
        m[(r, r)] = -2.0 * g;
        m[(r, r + 1)] = (1.0 + 1.0 / fi) * g;
    }
    m[(n - 1, n - 2)] = (1.0 - 1.0 / nf) * g;
    m[(n - 1, n - 1)] = -(1.0 - 1.0 / nf) * g;
    let mut b = DVector::zeros(n);
    b[n - 1] = -(1.0 + 1.0 / nf) / (p.a_a() * p.F * p.A_a * p.L_a * p.dx());
    (m, b)
}

/// Continuous-time conduction generator and ambient input column.
pub fn thermal_generator(p: &CellParams) -> (DMatrix<f64>, DVector<f64>) {
    let m = p.M;
    let mf = m as f64;
    let g = p.k_th / (p.rho * p.C_p * p.dy() * p.dy());
    let biot = p.dy() * p.h_conv / p.k_th;
    let mut a = DMatrix::zeros(m, m);
    a[(0, 0)] = -1.5 * g;
    a[(0, 1)] = 1.5 * g;
    for j in 2..m {
        let r = j - 1;
        let fj = j as f64;
        a[(r, r - 1)] = (1.0 - 1.0 / (2.0 * fj)) * g;
        a[(r, r)] = -2.0 * g;
        a[(r, r + 1)] = (1.0 + 1.0 / (2.0 * fj)) * g;
    }
    let outer = 1.0 + 1.0 / (2.0 * mf);
    a[(m - 1, m - 2)] = (1.0 - 1.0 / (2.0 * mf)) * g;
    a[(m - 1, m - 1)] = -2.0 * g + outer * (1.0 - biot) * g;
    let mut b = DVector::zeros(m);
    b[m - 1] = outer * biot * g;
    (a, b)
}

fn euler_ratio(g: &DMatrix<f64>, dt: f64) -> f64 {
    dt * g.diagonal().iter().fold(0.0_f64, |acc, d| acc.max(d.abs()))
}

fn check_nodes(count: usize, name: &str) -> Result<()> {
    if count < 2 {
        return Err(Error::config(format!(
            "{name} must be at least 2, got {count}"
        )));
    }
    Ok(())
}

pub fn build_electrochemical(p: &CellParams) -> Result<Electrochemical> {
    check_nodes(p.N, "N")?;
    let (g, b) = electrochemical_generator(p);
    let ratio = euler_ratio(&g, p.dt);
    if ratio > 1.0 {
        return Err(Error::Stability {
            model: "electrochemical",
            ratio,
        });
    }
    Ok(Electrochemical {
        a: DMatrix::identity(p.N, p.N) + g * p.dt,
        b: b * p.dt,
    })
}

pub fn build_thermal(p: &CellParams) -> Result<Thermal> {
    check_nodes(p.M, "M")?;
    let (g, b) = thermal_generator(p);
    let ratio = euler_ratio(&g, p.dt);
    if ratio > 1.0 {
        return Err(Error::Stability {
            model: "thermal",
            ratio,
        });
    }
    let mut c = DVector::zeros(p.M);
    c[p.M - 1] = 1.0;
    Ok(Thermal {
        a: DMatrix::identity(p.M, p.M) + g * p.dt,
        b: b * p.dt,
        c,
        heat_gain: p.dt / p.thermal_mass(),
    })
}

/// Discrete model with the voltage map linearized at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub c1: DVector<f64>,
    pub d1: f64,
    /// Voltage at the operating point not explained by `c1·z1 + d1·I`.
    pub offset: f64,
    pub a2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub c2: DVector<f64>,
    pub heat_gain: f64,
    /// The voltage slope used a one-sided OCP derivative.
    pub one_sided: bool,
}

impl StateSpace {
    pub fn linear_voltage(&self, z1: &DVector<f64>, current: f64) -> f64 {
        self.c1.dot(z1) + self.d1 * current + self.offset
    }

    pub fn electrochemical_step(&self, z1: &DVector<f64>, current: f64) -> DVector<f64> {
        &self.a1 * z1 + &self.b1 * current
    }

    /// One thermal step with total volumetric heat `heat` (W).
    pub fn thermal_step(&self, z2: &DVector<f64>, ambient: f64, heat: f64) -> DVector<f64> {
        let mut next = &self.a2 * z2 + &self.b2 * ambient;
        next.add_scalar_mut(self.heat_gain * heat);
        next
    }

    pub fn surface_temperature(&self, z2: &DVector<f64>) -> f64 {
        self.c2.dot(z2)
    }

    /// Replaces the voltage linearization, keeping the dynamics.
    pub fn relinearize(
        &mut self,
        p: &CellParams,
        z1: &DVector<f64>,
        current: f64,
        temp: f64,
    ) -> Result<()> {
        let lin = linearize_voltage(p, z1, current, temp)?;
        self.c1 = lin.c1;
        self.d1 = lin.d1;
        self.offset = lin.offset;
        self.one_sided = lin.one_sided;
        Ok(())
    }
}

/// Builds both models and linearizes the voltage at a uniform profile of
/// the given SOC, current and temperature.
pub fn build_state_space(p: &CellParams, soc: f64, current: f64, temp: f64) -> Result<StateSpace> {
    let e = build_electrochemical(p)?;
    let t = build_thermal(p)?;
    let z1 = uniform_state_at_soc(p, soc);
    let lin = linearize_voltage(p, &z1, current, temp)?;
    Ok(StateSpace {
        a1: e.a,
        b1: e.b,
        c1: lin.c1,
        d1: lin.d1,
        offset: lin.offset,
        a2: t.a,
        b2: t.b,
        c2: t.c,
        heat_gain: t.heat_gain,
        one_sided: lin.one_sided,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, m: usize) -> CellParams {
        CellParams {
            N: n,
            M: m,
            ..Default::default()
        }
    }

    #[test]
    fn two_node_diffusion_stencil() {
        let mut p = small(2, 2);
        p.D = 1e-14;
        p.X = 1e-5;
        p.dt = 1.0;
        let e = build_electrochemical(&p).unwrap();
        // δx = 5e-6, γ = 1e-14 / 25e-12 = 4e-4.
        let g = 4e-4;
        let expect = [[1.0 - 2.0 * g, 2.0 * g], [0.5 * g, 1.0 - 0.5 * g]];
        for (r, row) in expect.iter().enumerate() {
            for (c, want) in row.iter().enumerate() {
                assert!((e.a[(r, c)] - want).abs() < 1e-15, "{r},{c}");
            }
        }
        let beta = -1.5 / (p.a_a() * p.F * p.A_a * p.L_a * 5e-6);
        assert!((e.b[1] - beta).abs() < 1e-12 * beta.abs());
        assert_eq!(e.b[0], 0.0);
    }

    #[test]
    fn two_node_thermal_stencil() {
        let p = small(2, 2);
        let t = build_thermal(&p).unwrap();
        let dy = p.Y / 2.0;
        let g = p.k_th / (p.rho * p.C_p * dy * dy);
        let bi = dy * p.h_conv / p.k_th;
        assert!((t.a[(0, 0)] - (1.0 - 1.5 * g)).abs() < 1e-15);
        assert!((t.a[(0, 1)] - 1.5 * g).abs() < 1e-15);
        assert!((t.a[(1, 0)] - 0.75 * g).abs() < 1e-15);
        assert!((t.a[(1, 1)] - (1.0 - 2.0 * g + 1.25 * (1.0 - bi) * g)).abs() < 1e-15);
        assert!((t.b[1] - 1.25 * bi * g).abs() < 1e-18);
        assert_eq!(t.c.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn diffusion_rows_sum_to_zero() {
        let (g, _) = electrochemical_generator(&CellParams::default());
        for r in 0..g.nrows() {
            let s: f64 = g.row(r).iter().sum();
            assert!(s.abs() < 1e-12 * g[(r, r)].abs());
        }
    }

    #[test]
    fn gamma_uses_identified_diffusivity() {
        let p = CellParams::default();
        let (g, _) = electrochemical_generator(&p);
        let dx = p.X / p.N as f64;
        assert_eq!(g[(0, 1)], 2.0 * (1.022e-14 / (dx * dx)));
    }

    #[test]
    fn stability_guard_reports_ratio() {
        let p = CellParams {
            dt: 100.0,
            ..Default::default()
        };
        match build_electrochemical(&p).unwrap_err() {
            Error::Stability { ratio, .. } => assert!(ratio > 1.0),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn one_node_is_rejected() {
        let p = small(1, 4);
        assert!(matches!(
            build_electrochemical(&p).unwrap_err(),
            Error::Config { .. }
        ));
    }
}

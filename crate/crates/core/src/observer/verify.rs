//! Lyapunov certificate for the observer error dynamics and the resulting
//! ultimate bound under bounded disturbances.
//!
//! For `e⁺ = A_cl·e + η`, with `A_clᵀ P A_cl − P = −I`, the decrease
//! condition `λ_Q + Γ·x < 0` (`λ_Q` the smallest eigenvalue of
//! `A_clᵀ P A_cl − P`, `x = ‖A_clᵀ P‖`) confines the error asymptotically to
//! a ball of squared radius `−(λ̄_P + x/Γ)/(λ_Q + Γ·x)·‖η‖²`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_discrete_lyapunov, spectral_norm, spectral_radius, symmetric_extremes};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub p: Vec<Vec<f64>>,
    pub lambda_q: f64,
    pub x: f64,
    pub gamma: f64,
    pub margin: f64,
    pub lambda_p_min: f64,
    pub lambda_p_max: f64,
    pub spectral_radius: f64,
    pub passed: bool,
}

impl VerificationReport {
    pub fn p_matrix(&self) -> DMatrix<f64> {
        let n = self.p.len();
        DMatrix::from_fn(n, n, |i, j| self.p[i][j])
    }

    /// Largest `Γ` with a negative margin.
    pub fn critical_gamma(&self) -> f64 {
        -self.lambda_q / self.x
    }
}

pub fn closed_loop(a: &DMatrix<f64>, c: &DVector<f64>, l: &DVector<f64>) -> DMatrix<f64> {
    a - l * c.transpose()
}

pub fn verify_lyapunov(
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    l: &DVector<f64>,
    gamma: f64,
) -> Result<VerificationReport> {
    let n = a.nrows();
    if a.ncols() != n || c.len() != n || l.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: if c.len() != n { c.len() } else { l.len() },
        });
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma must be positive"));
    }
    let acl = closed_loop(a, c, l);
    let rho = spectral_radius(&acl);
    if rho >= 1.0 {
        return Err(Error::NotSchurStable {
            spectral_radius: rho,
        });
    }
    let p = solve_discrete_lyapunov(&acl, &DMatrix::identity(n, n))?;
    let q = acl.transpose() * &p * &acl - &p;
    let q = (&q + q.transpose()) * 0.5;
    let (lambda_q, _) = symmetric_extremes(&q);
    let x = spectral_norm(&(acl.transpose() * &p));
    let (lambda_p_min, lambda_p_max) = symmetric_extremes(&p);
    let margin = lambda_q + gamma * x;
    Ok(VerificationReport {
        p: (0..n)
            .map(|i| (0..n).map(|j| p[(i, j)]).collect())
            .collect(),
        lambda_q,
        x,
        gamma,
        margin,
        lambda_p_min,
        lambda_p_max,
        spectral_radius: rho,
        passed: margin < 0.0 && lambda_p_min > 0.0,
    })
}

pub fn ultimate_bound(report: &VerificationReport, eta_bound: f64) -> Result<f64> {
    if !report.passed {
        return Err(Error::invalid(format!(
            "ultimate bound undefined for a failing certificate (margin {})",
            report.margin
        )));
    }
    if !(eta_bound >= 0.0) {
        return Err(Error::invalid("disturbance bound must be non-negative"));
    }
    let r2 = -(report.lambda_p_max + report.x / report.gamma) / report.margin;
    Ok(r2.sqrt() * eta_bound)
}

/// Logarithmic grid from 1e-3 to 1, four points per decade.
pub fn gamma_grid() -> Vec<f64> {
    gamma_grid_from(-3)
}

/// Logarithmic grid from `10^lo_exp` to 1, four points per decade.
pub fn gamma_grid_from(lo_exp: i32) -> Vec<f64> {
    let lo = lo_exp.min(0);
    (0..=(-4 * lo))
        .map(|k| 10f64.powf(lo as f64 + k as f64 / 4.0))
        .collect()
}

/// The standard grid, extended downwards to a decade below the critical
/// `Γ` of `(A, C, L)` when that lies under 1e-3. Slow or strongly
/// non-normal error dynamics need such small `Γ`.
pub fn covering_gamma_grid(
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    l: &DVector<f64>,
) -> Result<Vec<f64>> {
    let crit = verify_lyapunov(a, c, l, 1.0)?.critical_gamma();
    if crit >= 1e-3 || !crit.is_finite() || crit <= 0.0 {
        return Ok(gamma_grid());
    }
    Ok(gamma_grid_from(crit.log10().floor() as i32 - 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub margin: f64,
    pub passed: bool,
    /// Ultimate-bound radius per unit disturbance, when passing.
    pub radius_per_unit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Passing certificate with the smallest bound, if any.
    pub best: Option<VerificationReport>,
    pub critical_gamma: f64,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.best.is_some()
    }
}

pub fn gamma_sweep(
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    l: &DVector<f64>,
    gammas: &[f64],
) -> Result<SweepReport> {
    let mut rows = Vec::with_capacity(gammas.len());
    let mut best: Option<(f64, VerificationReport)> = None;
    let mut critical_gamma = 0.0;
    for &g in gammas {
        let rep = verify_lyapunov(a, c, l, g)?;
        critical_gamma = rep.critical_gamma();
        let radius = ultimate_bound(&rep, 1.0).ok();
        if let Some(r) = radius {
            if best.as_ref().is_none_or(|(b, _)| r < *b) {
                best = Some((r, rep.clone()));
            }
        }
        rows.push(SweepRow {
            gamma: g,
            margin: rep.margin,
            passed: rep.passed,
            radius_per_unit: radius,
        });
    }
    Ok(SweepReport {
        rows,
        best: best.map(|(_, r)| r),
        critical_gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_certificate() {
        let one = DVector::from_element(1, 1.0);
        let zero = DVector::from_element(1, 0.0);
        let r = verify_lyapunov(&scalar(0.5), &one, &zero, 1.0).unwrap();
        assert!((r.p[0][0] - 4.0 / 3.0).abs() < 1e-14);
        assert!((r.lambda_q + 1.0).abs() < 1e-14);
        assert!((r.x - 2.0 / 3.0).abs() < 1e-14);
        assert!((r.critical_gamma() - 1.5).abs() < 1e-12);
        assert!(r.passed);
        let radius = ultimate_bound(&r, 1.0).unwrap();
        assert!((radius * radius - 6.0).abs() < 1e-12);
        assert_eq!(ultimate_bound(&r, 0.0).unwrap(), 0.0);
        assert!(
            !verify_lyapunov(&scalar(0.5), &one, &zero, 1.6)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn unstable_scalar_fails_with_radius() {
        let one = DVector::from_element(1, 1.0);
        let zero = DVector::from_element(1, 0.0);
        match verify_lyapunov(&scalar(1.1), &one, &zero, 0.1).unwrap_err() {
            Error::NotSchurStable { spectral_radius } => {
                assert!((spectral_radius - 1.1).abs() < 1e-12)
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn sweep_picks_smallest_bound() {
        let one = DVector::from_element(1, 1.0);
        let zero = DVector::from_element(1, 0.0);
        let s = gamma_sweep(&scalar(0.5), &one, &zero, &gamma_grid()).unwrap();
        let best = s.best.unwrap();
        // r²(Γ) = (4/3 + 2/(3Γ)) / (1 − 2Γ/3) is minimized at Γ = 0.5.
        // On the grid the nearest points are 10^-0.25 (r² ≈ 4.03) and
        // 10^-0.5 (r² ≈ 4.36).
        assert!((best.gamma - 10f64.powf(-0.25)).abs() < 1e-12);
        assert!(s.rows.iter().all(|r| r.passed));
    }
}

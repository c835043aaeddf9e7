//! Levenberg–Marquardt refinement of a least-squares residual on the unit box.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

const FD_STEP: f64 = 1e-6;
const LAMBDA_UP: f64 = 10.0;
const LAMBDA_DOWN: f64 = 0.3;
const LAMBDA_MAX: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct RefineResult {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub ssq: f64,
    pub evaluations: usize,
    /// `(evaluation count, ssq)` at each accepted step.
    pub trace: Vec<(usize, f64)>,
}

fn ssq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Damped Gauss–Newton with forward-difference Jacobians, projecting every
/// step onto `[0, 1]^n`. `residual` returns `None` for failed evaluations,
/// which are treated as rejected steps.
pub fn levenberg_marquardt<F>(residual: F, x0: &[f64], budget: usize, tol: f64) -> RefineResult
where
    F: Fn(&[f64]) -> Option<Vec<f64>> + Sync,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut evals = 1usize;
    let mut trace = Vec::new();
    let Some(mut r) = residual(&x) else {
        return RefineResult {
            x,
            ssq: f64::INFINITY,
            evaluations: evals,
            trace,
        };
    };
    let mut f = ssq(&r);
    trace.push((evals, f));
    let mut lambda = 1e-3;

    'outer: while evals + n < budget && f > 0.0 {
        let cols: Vec<Option<(f64, Vec<f64>)>> = (0..n)
            .into_par_iter()
            .map(|j| {
                // Step away from the nearer face so the probe stays inside.
                let h = if x[j] + FD_STEP <= 1.0 {
                    FD_STEP
                } else {
                    -FD_STEP
                };
                let mut xp = x.clone();
                xp[j] += h;
                residual(&xp).map(|rp| (h, rp))
            })
            .collect();
        evals += n;
        let m = r.len();
        let mut jac = DMatrix::zeros(m, n);
        for (j, c) in cols.into_iter().enumerate() {
            let Some((h, rp)) = c else { break 'outer };
            if rp.len() != m {
                break 'outer;
            }
            for i in 0..m {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let rv = DVector::from_vec(r.clone());
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &rv;
        let scale = jtj.diagonal().max().max(f64::MIN_POSITIVE);
        loop {
            if evals >= budget || lambda > LAMBDA_MAX {
                break 'outer;
            }
            let mut a = jtj.clone();
            for i in 0..n {
                // Marquardt scaling with a floor for directions the data cannot see.
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-9 * scale);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= LAMBDA_UP;
                continue;
            };
            let xn: Vec<f64> = x
                .iter()
                .zip(step.iter())
                .map(|(a, d)| (a + d).clamp(0.0, 1.0))
                .collect();
            let moved = xn
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            evals += 1;
            match residual(&xn) {
                Some(rn) if ssq(&rn) < f => {
                    let fnew = ssq(&rn);
                    let rel = (f - fnew) / f;
                    x = xn;
                    r = rn;
                    f = fnew;
                    trace.push((evals, f));
                    lambda = (lambda * LAMBDA_DOWN).max(1e-12);
                    if rel < tol || moved < tol {
                        break 'outer;
                    }
                    break;
                }
                _ => {
                    if moved < tol * 1e-3 {
                        break 'outer;
                    }
                    lambda *= LAMBDA_UP;
                }
            }
        }
    }
    RefineResult {
        x,
        ssq: f,
        evaluations: evals,
        trace,
    }
}

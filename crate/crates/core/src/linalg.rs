//! Small dense linear-algebra routines shared by the observer design and
//! verification code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Eigenvalues sorted in descending order of real part.
pub fn eigenvalues_real_desc(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.re).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, s| acc.max(*s))
}

/// Minimum and maximum eigenvalue of a symmetric matrix.
pub fn symmetric_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let ev = a.clone().symmetric_eigenvalues();
    ev.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Solves `Aᵀ P A − P = −Q` for symmetric `P` by vectorization.
pub fn solve_discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: a.ncols().max(q.nrows()),
        });
    }
    let at = a.transpose();
    let mut k = at.kronecker(&at);
    for i in 0..n * n {
        k[(i, i)] -= 1.0;
    }
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let vec_p = k.lu().solve(&rhs).ok_or_else(|| Error::NotSchurStable {
        spectral_radius: spectral_radius(a),
    })?;
    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// Observability matrix of `(A − σI, C)` with unit-norm rows, where `σ` is
/// the mean diagonal of `A`. The shift leaves the observable subspace
/// unchanged and keeps the rows from collapsing when `A` is close to `I`.
fn shifted_observability(a: &DMatrix<f64>, c: &DVector<f64>) -> (DMatrix<f64>, Vec<f64>, f64) {
    let n = a.nrows();
    let shift = a.trace() / n as f64;
    let mut a_s = a.clone();
    for i in 0..n {
        a_s[(i, i)] -= shift;
    }
    let mut o = DMatrix::zeros(n, n);
    let mut scales = Vec::with_capacity(n);
    let mut row = c.transpose();
    for k in 0..n {
        let norm = row.norm();
        let s = if norm > 0.0 { 1.0 / norm } else { 1.0 };
        o.set_row(k, &(&row * s));
        scales.push(s);
        row = &row * &a_s;
    }
    (o, scales, shift)
}

pub fn observability_rank(a: &DMatrix<f64>, c: &DVector<f64>) -> usize {
    let (o, _, _) = shifted_observability(a, c);
    o.rank(1e-12)
}

/// Output-injection gain `L` placing the eigenvalues of `A − L·Cᵀ` at
/// `poles` (single output, Ackermann's formula).
pub fn place_poles(a: &DMatrix<f64>, c: &DVector<f64>, poles: &[f64]) -> Result<DVector<f64>> {
    let n = a.nrows();
    if a.ncols() != n || c.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: c.len(),
        });
    }
    if poles.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: poles.len(),
        });
    }
    let rank = observability_rank(a, c);
    if rank < n {
        return Err(Error::Unobservable { rank, dim: n });
    }
    let (o, scales, shift) = shifted_observability(a, c);
    let mut a_s = a.clone();
    for i in 0..n {
        a_s[(i, i)] -= shift;
    }
    let mut phi = DMatrix::<f64>::identity(n, n);
    for &s in poles {
        let mut factor = a_s.clone();
        for i in 0..n {
            factor[(i, i)] -= s - shift;
        }
        phi *= factor;
    }
    let mut e_n = DVector::zeros(n);
    e_n[n - 1] = scales[n - 1];
    let w = o.lu().solve(&e_n).ok_or(Error::Unobservable {
        rank: n - 1,
        dim: n,
    })?;
    Ok(phi * w)
}

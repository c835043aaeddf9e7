//! Nelder–Mead minimization on the unit box.

use rayon::prelude::*;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Edge length of the starting simplex in box coordinates.
    pub initial_step: f64,
    pub max_evaluations: usize,
    /// Stop once the spread of vertex costs is at most this.
    pub f_tol: f64,
    /// and the simplex fits in a box of this half-width.
    pub x_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            max_evaluations: 2000,
            f_tol: 1e-12,
            x_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// `(evaluation count, best cost)` at every improvement of the best vertex.
    pub trace: Vec<(usize, f64)>,
}

fn clamp_unit(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t·(b − a), projected onto the box.
    let mut out: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
    clamp_unit(&mut out);
    out
}

/// Upper limit on fresh simplices built at a converged point.
const MAX_REBUILDS: usize = 12;

/// Minimizes `f` over `[0, 1]^n` starting from `x0`.
///
/// Trial points leaving the box are projected back onto it. Projection can
/// flatten the simplex against a face, so a converged search is rebuilt at
/// its best point and resumed. A rebuild that does not improve is retried
/// with a tenfold smaller simplex, down to `x_tol`. Batches of
/// independent evaluations (initial simplex, shrink) run in parallel; their
/// results are consumed in index order, so the outcome is deterministic.
pub fn minimize_unit_box<F>(f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut r = search(&f, x0, opts);
    let mut step = opts.initial_step;
    for _ in 0..MAX_REBUILDS {
        if !r.converged || r.evaluations >= opts.max_evaluations {
            break;
        }
        let rest = SimplexOptions {
            initial_step: step,
            max_evaluations: opts.max_evaluations - r.evaluations,
            ..*opts
        };
        let next = search(&f, &r.x, &rest);
        let improved = next.f < r.f - opts.f_tol;
        let offset = r.evaluations;
        let best = r.f;
        r.trace.extend(
            next.trace
                .iter()
                .filter(|(_, v)| *v < best)
                .map(|(e, v)| (e + offset, *v)),
        );
        r.evaluations += next.evaluations;
        r.converged = next.converged;
        if next.f < r.f {
            r.x = next.x;
            r.f = next.f;
        }
        if !improved {
            step *= 0.1;
            if step < opts.x_tol {
                break;
            }
        }
    }
    r
}

fn search<F>(f: &F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let mut start = x0.to_vec();
    clamp_unit(&mut start);
    let mut evals = 0usize;
    let mut trace = Vec::new();

    let mut pts = vec![start.clone()];
    for i in 0..n {
        let mut p = start.clone();
        // Step inward when the start sits on the upper face.
        p[i] = if p[i] + opts.initial_step <= 1.0 {
            p[i] + opts.initial_step
        } else {
            p[i] - opts.initial_step
        };
        pts.push(p);
    }
    let budget = opts.max_evaluations.max(1);
    pts.truncate(budget.min(n + 1));
    let mut vals: Vec<f64> = pts.par_iter().map(|p| f(p)).collect();
    evals += pts.len();
    if pts.len() < n + 1 {
        let (i, v) = argmin(&vals);
        return SimplexResult {
            x: pts[i].clone(),
            f: v,
            evaluations: evals,
            converged: false,
            trace: vec![(evals, v)],
        };
    }
    let mut best = f64::INFINITY;
    let mut note = |evals: usize, v: f64, trace: &mut Vec<(usize, f64)>| {
        if v < best {
            best = v;
            trace.push((evals, v));
        }
    };
    for v in &vals {
        note(evals, *v, &mut trace);
    }

    let mut converged = false;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let width = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= opts.f_tol && width <= opts.x_tol {
            converged = true;
            break;
        }
        if evals >= budget {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let xr = combine(&centroid, &pts[n], -REFLECT);
        let fr = f(&xr);
        evals += 1;
        note(evals, fr, &mut trace);

        if fr < vals[0] {
            if evals < budget {
                let xe = combine(&centroid, &pts[n], -EXPAND);
                let fe = f(&xe);
                evals += 1;
                note(evals, fe, &mut trace);
                if fe < fr {
                    pts[n] = xe;
                    vals[n] = fe;
                    continue;
                }
            }
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        if evals >= budget {
            break;
        }
        // Outside contraction when the reflection improved on the worst point.
        let (xc, fc_target) = if fr < vals[n] {
            (combine(&centroid, &xr, CONTRACT), fr)
        } else {
            (combine(&centroid, &pts[n], CONTRACT), vals[n])
        };
        let fc = f(&xc);
        evals += 1;
        note(evals, fc, &mut trace);
        if fc <= fc_target {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        let remaining = budget.saturating_sub(evals).min(n);
        if remaining == 0 {
            break;
        }
        let shrunk: Vec<Vec<f64>> = (1..=remaining)
            .map(|i| combine(&pts[0], &pts[i], SHRINK))
            .collect();
        let sv: Vec<f64> = shrunk.par_iter().map(|p| f(p)).collect();
        for (k, (p, v)) in shrunk.into_iter().zip(sv).enumerate() {
            evals += 1;
            note(evals, v, &mut trace);
            pts[k + 1] = p;
            vals[k + 1] = v;
        }
    }
    let (i, v) = argmin(&vals);
    SimplexResult {
        x: pts[i].clone(),
        f: v,
        evaluations: evals,
        converged,
        trace,
    }
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter().copied().enumerate().fold(
        (0, f64::INFINITY),
        |acc, (i, x)| if x < acc.1 { (i, x) } else { acc },
    )
}

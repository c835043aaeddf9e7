//! Random well-conditioned systems with placed gains: the certificate sweep
//! must find a passing Γ and the simulated error must respect the bound.

use cellguard::linalg::spectral_radius;
use cellguard::observer::{closed_loop, design_gain, gamma_grid, gamma_sweep, ultimate_bound};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{fail, Check};

const TRIALS: usize = 20;
const STEPS: usize = 100_000;
const ETA_BOUND: f64 = 1.0;

/// `count` values in `[lo, hi]` at least `gap` apart.
fn separated(rng: &mut ChaCha8Rng, count: usize, lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..count).map(|_| rng.random_range(lo..=hi)).collect();
        v.sort_by(f64::total_cmp);
        if v.windows(2).all(|w| w[1] - w[0] >= gap) {
            return v;
        }
    }
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Symmetric system with separated eigenvalues in [0.2, 1.05], a random
/// orthogonal eigenbasis and an output that sees every mode with weight
/// between 0.5 and 1, so the placement problem is well conditioned.
fn random_system(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    let lambda = separated(rng, n, 0.2, 1.05, 0.1);
    let a = &q * DMatrix::from_diagonal(&DVector::from_vec(lambda)) * q.transpose();
    let m = DVector::from_fn(n, |_, _| {
        let w: f64 = rng.random_range(0.5..=1.0);
        if rng.random_bool(0.5) {
            w
        } else {
            -w
        }
    });
    (a, &q * m)
}

pub fn check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut held = 0;
    let mut tightest: f64 = 0.0;
    for trial in 0..TRIALS {
        let n = 2 + trial % 3;
        let (a, c) = random_system(&mut rng, n);
        let spectrum = separated(&mut rng, n, 0.3, 0.9, 0.1);
        let l = design_gain(&a, &c, &spectrum).map_err(fail)?;
        let acl = closed_loop(&a, &c, &l);
        let rho = spectral_radius(&acl);
        if (rho - spectrum[n - 1]).abs() > 1e-8 {
            return Err(format!(
                "trial {trial}: placed radius {rho}, wanted {}",
                spectrum[n - 1]
            ));
        }
        let sweep = gamma_sweep(&a, &c, &l, &gamma_grid()).map_err(fail)?;
        let best = sweep
            .best
            .ok_or_else(|| format!("trial {trial}: no passing Γ on the grid"))?;
        let bound = ultimate_bound(&best, ETA_BOUND).map_err(fail)?;
        let mut e = DVector::zeros(n);
        let mut sup: f64 = 0.0;
        for _ in 0..STEPS {
            let eta = gaussian_vector(&mut rng, n).normalize() * ETA_BOUND;
            e = &acl * e + eta;
            sup = sup.max(e.norm());
        }
        if sup <= bound {
            held += 1;
        }
        tightest = tightest.max(sup / bound);
    }
    if held < TRIALS {
        return Err(format!("bound held in {held}/{TRIALS} trials"));
    }
    Ok(format!(
        "passing Γ in {TRIALS}/{TRIALS}, bound held in {held}/{TRIALS} over {STEPS} steps \
         (largest sup/bound {tightest:.3})"
    ))
}

//! Mass conservation, thermal relaxation, spectral radius under the
//! stability guard and simulation speed.

use std::time::Instant;

use cellguard::linalg::spectral_radius;
use cellguard::model::{
    build_electrochemical, build_thermal, electrochemical_generator, mass_weights,
    thermal_generator, CellParams,
};
use cellguard::plant::{run_cycle, CycleSetup, Protocol};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{fail, Check};

const STEPS: usize = 10_000;
const AMBIENT: f64 = 298.15;

fn mass_drift(p: &CellParams, rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let e = build_electrochemical(p).map_err(fail)?;
    let w = mass_weights(p.N);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let mut z = DVector::from_fn(p.N, |_, _| rng.random_range(0.05..0.95) * p.c_max_a);
        let m0 = w.dot(&z);
        for _ in 0..STEPS {
            z = &e.a * &z;
        }
        worst = worst.max(((w.dot(&z) - m0) / m0).abs());
    }
    Ok(worst)
}

/// Steps until the max-norm distance to ambient falls by 1e-6, failing if
/// it ever grows.
fn relaxation_steps(p: &CellParams, rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let th = build_thermal(p).map_err(fail)?;
    let mut worst = 0;
    for _ in 0..10 {
        let mut z = DVector::from_fn(p.M, |_, _| rng.random_range(260.0..360.0));
        let dist = |z: &DVector<f64>| z.iter().map(|t| (t - AMBIENT).abs()).fold(0.0, f64::max);
        let d0 = dist(&z);
        let mut prev = d0;
        let mut k = 0;
        while prev > 1e-6 * d0 {
            z = &th.a * &z + &th.b * AMBIENT;
            let d = dist(&z);
            if d > prev * (1.0 + 1e-12) {
                return Err(format!(
                    "distance to ambient grew at step {k}: {prev} -> {d}"
                ));
            }
            prev = d;
            k += 1;
            if k > 10_000_000 {
                return Err("no relaxation within 1e7 steps".into());
            }
        }
        worst = worst.max(k);
    }
    Ok(worst)
}

/// Largest spectral radius over random parameter scalings and time steps
/// inside the stability guard.
fn guarded_radius(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let mut worst = 0.0_f64;
    for _ in 0..40 {
        let mut p = CellParams::default();
        p.D *= rng.random_range(0.5..4.0);
        p.k_th *= rng.random_range(0.5..4.0);
        p.h_conv *= rng.random_range(0.2..20.0);
        let (g1, _) = electrochemical_generator(&p);
        let (g2, _) = thermal_generator(&p);
        let diag =
            |g: &nalgebra::DMatrix<f64>| g.diagonal().iter().fold(0.0_f64, |a, d| a.max(d.abs()));
        let dt_max = 1.0 / diag(&g1).max(diag(&g2));
        p.dt = dt_max * rng.random_range(0.01..=1.0);
        let a1 = build_electrochemical(&p).map_err(fail)?.a;
        let a2 = build_thermal(&p).map_err(fail)?.a;
        worst = worst.max(spectral_radius(&a1)).max(spectral_radius(&a2));
    }
    Ok(worst)
}

pub fn check() -> Check {
    let p = CellParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let drift = mass_drift(&p, &mut rng)?;
    if drift > 1e-10 {
        return Err(format!("relative mass drift {drift:e} over {STEPS} steps"));
    }
    let relax = relaxation_steps(&p, &mut rng)?;
    let rho = guarded_radius(&mut rng)?;
    if rho > 1.0 + 1e-12 {
        return Err(format!("spectral radius {rho} under the stability guard"));
    }
    if p.N != 10 || p.M != 10 {
        return Err("default cell is not N = M = 10".into());
    }
    let mut setup = CycleSetup::new(
        p,
        Protocol::constant_current(0.3).with_duration(STEPS as f64),
    );
    setup.initial_soc = 0.6;
    let start = Instant::now();
    let rec = run_cycle(&setup).map_err(fail)?;
    let secs = start.elapsed().as_secs_f64();
    if rec.len() < STEPS {
        return Err(format!("simulated {} samples, expected {STEPS}", rec.len()));
    }
    if secs >= 5.0 {
        return Err(format!("{STEPS} steps took {secs:.2} s"));
    }
    Ok(format!(
        "mass drift {drift:.1e}, monotone relaxation to 1e-6 within {relax} steps, \
         max spectral radius {rho:.12}, {} steps in {secs:.3} s",
        rec.len()
    ))
}

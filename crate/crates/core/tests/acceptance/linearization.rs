//! Voltage linearization against central finite differences.

use cellguard::model::{
    build_state_space, linearize_voltage, terminal_voltage, uniform_state_at_soc, CellParams,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{fail, Check};

const POINTS: usize = 10;
const TOL: f64 = 1e-6;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn check() -> Check {
    let p = CellParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut worst_c: f64 = 0.0;
    let mut worst_d: f64 = 0.0;
    for _ in 0..POINTS {
        let soc = rng.random_range(0.1..0.9);
        let current = rng.random_range(-5.0..5.0);
        let temp = rng.random_range(283.0..318.0);
        let base = uniform_state_at_soc(&p, soc);
        let z1 = DVector::from_fn(p.N, |i, _| base[i] * rng.random_range(0.99..1.01));
        let lin = linearize_voltage(&p, &z1, current, temp).map_err(fail)?;
        if lin.one_sided {
            return Err(format!("interior point at SOC {soc} reported one-sided"));
        }
        let v = |z: &DVector<f64>, i: f64| terminal_voltage(&p, z, i, temp).map_err(fail);
        for k in 0..p.N {
            let h = 1e-5 * z1[k];
            let (mut zp, mut zm) = (z1.clone(), z1.clone());
            zp[k] += h;
            zm[k] -= h;
            let fd = (v(&zp, current)? - v(&zm, current)?) / (2.0 * h);
            if k + 1 < p.N {
                if fd != 0.0 || lin.c1[k] != 0.0 {
                    return Err(format!("interior node {k} affects the voltage"));
                }
            } else {
                worst_c = worst_c.max(rel(lin.c1[k], fd));
            }
        }
        let h = 1e-4;
        let fd = (v(&z1, current + h)? - v(&z1, current - h)?) / (2.0 * h);
        worst_d = worst_d.max(rel(lin.d1, fd));
    }
    if worst_c > TOL || worst_d > TOL {
        return Err(format!(
            "relative error C1 {worst_c:e}, D1 {worst_d:e} exceeds {TOL:e}"
        ));
    }
    let ss = build_state_space(&p, 0.5, 0.0, 298.15).map_err(fail)?;
    for _ in 0..POINTS {
        let z2 = DVector::from_fn(p.M, |_, _| rng.random_range(250.0..400.0));
        if ss.surface_temperature(&z2) != z2[p.M - 1] {
            return Err("C2 does not extract the surface node".into());
        }
    }
    Ok(format!(
        "{POINTS} operating points: max relative error C1 {worst_c:.1e}, D1 {worst_d:.1e}"
    ))
}

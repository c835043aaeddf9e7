//! Observer transient on a linear plant, residual reduction from learning,
//! and a fault that is only detected once the mismatch is learned.

use cellguard::detector::{decide, LearnedModels, Thresholds};
use cellguard::linalg::spectral_radius;
use cellguard::model::CellParams;
use cellguard::observer::{
    closed_loop, Measurement, ObserverDesign, ObserverState, OutputMode, Residuals,
};
use cellguard::pipeline::{DetectionSetup, OperatingPoint};
use cellguard::scenario::Scenario;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{fail, scenarios_dir, Check};

const AMBIENT: f64 = 298.15;

/// Zero-current linear plant from a perturbed initial state. Returns the
/// step budget and the largest residual at and after it.
fn linear_transient() -> Result<(usize, f64), String> {
    let p = CellParams::default();
    let setup = DetectionSetup::new(
        p.clone(),
        &ObserverDesign::default(),
        &OperatingPoint::default(),
        OutputMode::Fixed,
        AMBIENT,
    )
    .map_err(fail)?;
    let ss = &setup.ss;
    let rho_v = spectral_radius(&closed_loop(&ss.a1, &ss.c1, &setup.gains.voltage_vec()));
    let rho_t = spectral_radius(&closed_loop(&ss.a2, &ss.c2, &setup.gains.thermal_vec()));
    let rho = rho_v.max(rho_t);
    let budget = (10.0 / (1.0 - rho)).ceil() as usize;

    let models = LearnedModels::default();
    let obs = setup.observer(&models);
    let mut est = ObserverState::uniform(&p, 0.5, AMBIENT);
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut z1 = est.z1_hat.map(|c| c + rng.random_range(-300.0..300.0));
    let mut z2 = DVector::from_fn(p.M, |_, _| AMBIENT + rng.random_range(-5.0..5.0));
    let mut late: f64 = 0.0;
    for k in 0..budget + 100 {
        let m = Measurement {
            t: k as f64 * p.dt,
            current: 0.0,
            voltage: ss.linear_voltage(&z1, 0.0),
            temperature: ss.surface_temperature(&z2),
        };
        let (next, r) = obs.step(&est, &m, k).map_err(fail)?;
        if k >= budget {
            late = late.max(r.r_v.abs()).max(r.r_t.abs());
        }
        est = next;
        z1 = ss.electrochemical_step(&z1, 0.0);
        z2 = ss.thermal_step(&z2, AMBIENT, 0.0);
    }
    Ok((budget, late))
}

fn mean_abs_tail(r: &[Residuals]) -> f64 {
    let tail = &r[r.len() / 2..];
    tail.iter().map(|x| x.r_v.abs()).sum::<f64>() / tail.len() as f64
}

/// Second-half mean |r_V| with and without learning under a 30 mV smooth
/// voltage error.
fn learning_reduction() -> Result<(f64, f64), String> {
    let mut s = Scenario::load(&scenarios_dir().join("no_fault.json")).map_err(fail)?;
    s.uncertainty.voltage.smooth_amplitude = 0.03;
    let setup = s.detection_setup().map_err(fail)?;
    let models = s.learn(&setup).map_err(fail)?;
    let rec = s.simulate().map_err(fail)?;
    let with = setup.residuals(&rec, &models).map_err(fail)?;
    let without = setup
        .residuals(&rec, &LearnedModels::default())
        .map_err(fail)?;
    Ok((mean_abs_tail(&with), mean_abs_tail(&without)))
}

/// Whether any voltage alarm falls inside the fault window, and whether
/// any falls outside it.
fn alarms(r: &[Residuals], th: &Thresholds, window: [f64; 2]) -> (bool, bool) {
    let d = decide(r, th, None);
    let inside = |t: f64| t >= window[0] && t <= window[1];
    let flagged = d.t.iter().zip(&d.voltage).filter(|(_, f)| **f);
    let (mut hit, mut stray) = (false, false);
    for (t, _) in flagged {
        if inside(*t) {
            hit = true;
        } else {
            stray = true;
        }
    }
    (hit, stray)
}

/// Fault scales at which the case 2 voltage fault is caught with learning
/// and missed without it, both runs free of alarms outside the window.
fn masked_fault_sweep() -> Result<Vec<f64>, String> {
    let mut s = Scenario::load(&scenarios_dir().join("voltage_fault_case2.json")).map_err(fail)?;
    s.output_mode = OutputMode::Relinearized;
    s.uncertainty.voltage.smooth_amplitude = -0.04;
    let setup = s.detection_setup().map_err(fail)?;
    let models = s.learn(&setup).map_err(fail)?;
    let th = Thresholds::fixed(0.01, 0.5).map_err(fail)?;
    let mut only_with = Vec::new();
    for scale in [0.4, 0.5, 0.6, 0.7, 0.8, 1.0] {
        let mut v = s.clone();
        let f = v
            .fault
            .voltage
            .as_mut()
            .ok_or("case 2 has no voltage fault")?;
        f.a1 *= scale;
        f.a2 *= scale;
        let window = f.window;
        let rec = v.simulate().map_err(fail)?;
        let rw = setup.residuals(&rec, &models).map_err(fail)?;
        let ro = setup
            .residuals(&rec, &LearnedModels::default())
            .map_err(fail)?;
        let (hit_w, stray_w) = alarms(&rw, &th, window);
        let (hit_o, stray_o) = alarms(&ro, &th, window);
        if hit_w && !stray_w && !hit_o && !stray_o {
            only_with.push(scale);
        }
    }
    Ok(only_with)
}

pub fn check() -> Check {
    let (budget, late) = linear_transient()?;
    if late >= 1e-6 {
        return Err(format!("residual {late:e} after the {budget}-step budget"));
    }
    let (with, without) = learning_reduction()?;
    let ratio = without / with;
    if ratio < 5.0 {
        return Err(format!(
            "steady-state |r_V| {with:e} with learning, {without:e} without (ratio {ratio:.2})"
        ));
    }
    let scales = masked_fault_sweep()?;
    if scales.is_empty() {
        return Err("no swept fault scale is detected with learning and missed without".into());
    }
    Ok(format!(
        "linear transient below 1e-6 after {budget} steps (max {late:.1e}); \
         steady |r_V| {:.2} mV with vs {:.2} mV without learning ({ratio:.1}x); \
         fault detected only with learning at scales {scales:?}",
        with * 1e3,
        without * 1e3
    ))
}

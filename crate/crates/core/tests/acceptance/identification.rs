//! Recovery of the data-generating parameters from a ±20% start.

use std::time::Instant;

use cellguard::identify::{identify, ProblemFile};
use cellguard::model::CellParams;

use crate::{fail, scenarios_dir, Check};

const TOL: f64 = 0.05;

pub fn check() -> Check {
    let file = ProblemFile::load(&scenarios_dir().join("identify_synthetic.json")).map_err(fail)?;
    let problem = file.problem().map_err(fail)?;
    let truth = CellParams::default();
    let start = Instant::now();
    let (theta, report) = identify(&problem, &file.settings).map_err(fail)?;
    let secs = start.elapsed().as_secs_f64();

    let mut worst_start: f64 = 0.0;
    for (spec, v) in problem.parameters.iter().zip(problem.theta0()) {
        let t = truth.get(&spec.key).ok_or("unknown key")?;
        worst_start = worst_start.max(((v - t) / t).abs());
    }
    if (worst_start - 0.2).abs() > 1e-9 {
        return Err(format!(
            "start is {worst_start:.3} from the truth, expected 0.2"
        ));
    }
    if report.final_cost > 1e-4 {
        return Err(format!("final cost {:e}", report.final_cost));
    }
    if secs >= 120.0 {
        return Err(format!("identification took {secs:.1} s"));
    }
    let mut recovered = Vec::new();
    let mut excluded = Vec::new();
    for ((spec, v), sens) in problem
        .parameters
        .iter()
        .zip(&theta)
        .zip(&report.sensitivity)
    {
        if !(spec.lower <= *v && *v <= spec.upper) {
            return Err(format!("{} = {v} outside its bounds", spec.key));
        }
        let t = truth.get(&spec.key).ok_or("unknown key")?;
        let err = ((v - t) / t).abs();
        if sens.flat || !sens.identifiable {
            excluded.push(spec.key.clone());
            continue;
        }
        if err > TOL {
            return Err(format!("{} recovered {:.2}% off", spec.key, 100.0 * err));
        }
        recovered.push(format!("{} {:.1e}", spec.key, err));
    }
    for key in ["R_b", "D", "h_conv"] {
        if excluded.iter().any(|k| k == key) {
            return Err(format!("{key} reported as not recoverable"));
        }
    }
    Ok(format!(
        "cost {:.2e} -> {:.2e} in {} evaluations, {secs:.1} s; relative errors {}; \
         excluded as not identifiable: {}",
        report.initial_cost,
        report.final_cost,
        report.evaluations,
        recovered.join(", "),
        excluded.join(", ")
    ))
}

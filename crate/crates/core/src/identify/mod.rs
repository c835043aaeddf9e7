//! Parameter identification by RMS fitting of simulated to recorded voltage
//! and surface temperature.

mod refine;
mod simplex;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use refine::{levenberg_marquardt, RefineResult};
pub use simplex::{minimize_unit_box, SimplexOptions, SimplexResult};

use crate::error::{Error, Result};
use crate::io::read_json;
use crate::model::{
    average_temperature, build_electrochemical, build_thermal, open_circuit_voltage_saturated,
    overpotential, stoichiometry_excursion, CellParams, PlantState,
};
use crate::plant::CycleRecord;
use crate::scenario::Scenario;

/// Keys of the identified parameter vector, in canonical order.
pub const IDENTIFIED_KEYS: [&str; 10] = [
    "D", "A_a", "A_c", "R_b", "m_Li", "eps_a", "eps_c", "h_conv", "C_p", "k_th",
];

pub const REPORT_SCHEMA: &str = "cellguard.identify-report/1";
pub const PROBLEM_SCHEMA: &str = "cellguard.identify/1";

/// Relative perturbation used by the sensitivity report.
pub const SENSITIVITY_STEP: f64 = 0.05;
/// A parameter is flat when its cost change is below this fraction of the
/// largest change across parameters.
pub const FLAT_FRACTION: f64 = 1e-3;

/// Singular values of the log-parameter Jacobian below this fraction of the
/// largest one span directions the data cannot resolve.
pub const NULL_RATIO: f64 = 1e-4;

/// A parameter whose weight in a null direction exceeds this is reported as
/// not identifiable.
pub const NULL_LOADING: f64 = 0.1;

const JACOBIAN_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub key: String,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ParameterSpec {
    pub fn new(key: &str, initial: f64, lower: f64, upper: f64) -> Self {
        Self {
            key: key.to_string(),
            initial,
            lower,
            upper,
        }
    }

    fn log_scaled(&self) -> bool {
        self.lower > 0.0
    }

    pub fn to_unit(&self, v: f64) -> f64 {
        if self.upper == self.lower {
            return 0.0;
        }
        if self.log_scaled() {
            (v.ln() - self.lower.ln()) / (self.upper.ln() - self.lower.ln())
        } else {
            (v - self.lower) / (self.upper - self.lower)
        }
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        // Box corners map to the bounds exactly.
        if u <= 0.0 {
            return self.lower;
        }
        if u >= 1.0 {
            return self.upper;
        }
        let v = if self.log_scaled() {
            (self.lower.ln() + u * (self.upper.ln() - self.lower.ln())).exp()
        } else {
            self.lower + u * (self.upper - self.lower)
        };
        v.clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub voltage: f64,
    pub temperature: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            voltage: 1.0,
            temperature: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentifySettings {
    pub max_evaluations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Cost reported for parameter sets whose simulation fails.
    pub penalty: f64,
    /// A start at or below this cost is accepted without optimizing.
    pub cost_floor: f64,
    pub f_tol: f64,
    pub x_tol: f64,
    /// Part of `max_evaluations` reserved for the least-squares refinement
    /// that follows the simplex search.
    pub refine_evaluations: usize,
}

impl Default for IdentifySettings {
    fn default() -> Self {
        Self {
            max_evaluations: 2000,
            restarts: 3,
            seed: 0,
            penalty: 1e3,
            cost_floor: 1e-12,
            f_tol: 1e-12,
            x_tol: 1e-7,
            refine_evaluations: 600,
        }
    }
}

/// Temperature fed to the voltage model during replay.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoltageTemperature {
    /// The simulated temperature: voltage and thermal channels are coupled.
    #[default]
    Model,
    /// The recorded surface temperature: the voltage channel does not depend
    /// on thermal parameters.
    Measured,
}

/// Data, free parameters with bounds, and channel weights.
#[derive(Debug, Clone)]
pub struct IdentificationProblem {
    /// Values for every parameter not being identified.
    pub base: CellParams,
    pub data: Vec<CycleRecord>,
    pub parameters: Vec<ParameterSpec>,
    pub weights: CostWeights,
    pub voltage_temperature: VoltageTemperature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub total: f64,
    pub rms_voltage: f64,
    pub rms_temperature: f64,
    /// The simulation failed and `total` is the penalty value.
    pub penalized: bool,
}

impl IdentificationProblem {
    /// All ten identified parameters, starting at `theta0` with bounds at
    /// `theta0 / spread` and `theta0 * spread`, clipped to physical ranges.
    pub fn standard(
        base: CellParams,
        data: Vec<CycleRecord>,
        theta0: &[f64],
        spread: f64,
    ) -> Result<Self> {
        if theta0.len() != IDENTIFIED_KEYS.len() {
            return Err(Error::Dimension {
                expected: IDENTIFIED_KEYS.len(),
                got: theta0.len(),
            });
        }
        let parameters = IDENTIFIED_KEYS
            .iter()
            .zip(theta0)
            .map(|(k, &v)| {
                let mut hi = v * spread;
                if k.starts_with("eps") {
                    hi = hi.min(1.0);
                }
                ParameterSpec::new(k, v, v / spread, hi)
            })
            .collect();
        let p = Self {
            base,
            data,
            parameters,
            weights: CostWeights::default(),
            voltage_temperature: VoltageTemperature::Model,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.is_empty() {
            return Err(Error::Invalid(
                "identification needs at least one record".into(),
            ));
        }
        if self.parameters.is_empty() {
            return Err(Error::Invalid("no parameters to identify".into()));
        }
        let w = self.weights;
        if !(w.voltage >= 0.0 && w.temperature >= 0.0) || w.voltage + w.temperature == 0.0 {
            return Err(Error::Invalid(
                "weights must be non-negative and not both zero".into(),
            ));
        }
        let mut probe = self.base.clone();
        for s in &self.parameters {
            if probe.get(&s.key).is_none() {
                return Err(Error::Invalid(format!("unknown parameter '{}'", s.key)));
            }
            if !(s.lower <= s.initial && s.initial <= s.upper) || !s.lower.is_finite() {
                return Err(Error::Invalid(format!(
                    "{}: initial {} outside bounds [{}, {}]",
                    s.key, s.initial, s.lower, s.upper
                )));
            }
            if s.lower < 0.0 {
                return Err(Error::Invalid(format!(
                    "{}: lower bound must be >= 0",
                    s.key
                )));
            }
            probe.set(&s.key, s.initial)?;
        }
        probe.validate()
    }

    pub fn theta0(&self) -> Vec<f64> {
        self.parameters.iter().map(|s| s.initial).collect()
    }

    pub fn keys(&self) -> Vec<String> {
        self.parameters.iter().map(|s| s.key.clone()).collect()
    }

    /// Cell parameters with `theta` substituted.
    pub fn params_at(&self, theta: &[f64]) -> Result<CellParams> {
        if theta.len() != self.parameters.len() {
            return Err(Error::Dimension {
                expected: self.parameters.len(),
                got: theta.len(),
            });
        }
        let mut p = self.base.clone();
        for (s, &v) in self.parameters.iter().zip(theta) {
            p.set(&s.key, v)?;
        }
        p.validate()?;
        Ok(p)
    }

    fn in_bounds(&self, theta: &[f64]) -> bool {
        self.parameters
            .iter()
            .zip(theta)
            .all(|(s, &v)| s.lower <= v && v <= s.upper)
    }

    fn to_unit(&self, theta: &[f64]) -> Vec<f64> {
        self.parameters
            .iter()
            .zip(theta)
            .map(|(s, &v)| s.to_unit(v))
            .collect()
    }

    fn theta_from_unit(&self, u: &[f64]) -> Vec<f64> {
        self.parameters
            .iter()
            .zip(u)
            .map(|(s, &x)| s.from_unit(x))
            .collect()
    }
}

/// Model outputs replayed under a record's current profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub voltage: Vec<f64>,
    pub temperature: Vec<f64>,
    /// Sum over samples of the stoichiometry distance outside the OCP maps.
    /// Open-circuit voltages are saturated at the map ends meanwhile.
    pub excursion: f64,
}

/// Replays a record's current through the model at `params`, starting from
/// the record's initial SOC and temperature.
pub fn simulate_outputs(
    params: &CellParams,
    record: &CycleRecord,
    mode: VoltageTemperature,
) -> Result<Replay> {
    let meta = &record.meta;
    let electro = build_electrochemical(params)?;
    let thermal = build_thermal(params)?;
    let mut state = PlantState::uniform(params, meta.initial_soc, meta.initial_temperature);
    let n = record.samples.len();
    let mut out = Replay {
        voltage: Vec::with_capacity(n),
        temperature: Vec::with_capacity(n),
        excursion: 0.0,
    };
    for (k, s) in record.samples.iter().enumerate() {
        let c_surf = state.surface_concentration();
        let ocv = open_circuit_voltage_saturated(params, c_surf);
        out.excursion += stoichiometry_excursion(params, c_surf);
        let temp = match mode {
            VoltageTemperature::Model => average_temperature(&state.z2),
            VoltageTemperature::Measured => s.t_meas,
        };
        let v = ocv - params.R_b * s.current - overpotential(params, s.current, temp);
        out.voltage.push(v);
        out.temperature.push(state.surface_temperature());
        if k + 1 == n {
            break;
        }
        let heat = s.current * (ocv - v);
        let z1 = &electro.a * &state.z1 + &electro.b * s.current;
        let mut z2 = &thermal.a * &state.z2 + &thermal.b * meta.ambient;
        z2.add_scalar_mut(thermal.heat_gain * heat);
        state = PlantState {
            z1,
            z2,
            t: state.t + params.dt,
        };
        // Out-of-range concentrations are graded through the excursion term;
        // only numerical blow-up aborts the replay.
        if state
            .z1
            .iter()
            .chain(state.z2.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::SimulationDiverged {
                step: k,
                what: "non-finite state".into(),
            });
        }
    }
    Ok(out)
}

fn evaluate(problem: &IdentificationProblem, theta: &[f64]) -> Result<(f64, f64, f64)> {
    let params = problem.params_at(theta)?;
    let (mut sv, mut st, mut ex, mut count) = (0.0, 0.0, 0.0, 0usize);
    for rec in &problem.data {
        let r = simulate_outputs(&params, rec, problem.voltage_temperature)?;
        for ((s, vm), tm) in rec.samples.iter().zip(&r.voltage).zip(&r.temperature) {
            sv += (s.v_meas - vm).powi(2);
            st += (s.t_meas - tm).powi(2);
        }
        ex += r.excursion;
        count += rec.samples.len();
    }
    let n = count.max(1) as f64;
    Ok(((sv / n).sqrt(), (st / n).sqrt(), ex / n))
}

/// Per-sample residuals scaled so their sum of squares is
/// `w_V·ms(ΔV) + w_T·ms(ΔT)`, plus one entry for the OCP-domain excursion.
fn residual_vector(
    problem: &IdentificationProblem,
    theta: &[f64],
    penalty: f64,
) -> Option<Vec<f64>> {
    let params = problem.params_at(theta).ok()?;
    let n: usize = problem.data.iter().map(|r| r.samples.len()).sum();
    let (wv, wt) = (
        (problem.weights.voltage / n.max(1) as f64).sqrt(),
        (problem.weights.temperature / n.max(1) as f64).sqrt(),
    );
    let mut out = Vec::with_capacity(2 * n + 1);
    let mut ex = 0.0;
    for rec in &problem.data {
        let r = simulate_outputs(&params, rec, problem.voltage_temperature).ok()?;
        for ((s, vm), tm) in rec.samples.iter().zip(&r.voltage).zip(&r.temperature) {
            out.push(wv * (s.v_meas - vm));
            out.push(wt * (s.t_meas - tm));
        }
        ex += r.excursion;
    }
    out.push(penalty * ex / n.max(1) as f64);
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Weighted RMS misfit `w_V·rms(V_meas − V_model) + w_T·rms(T_meas − T_model)`.
///
/// Parameter sets that drive a stoichiometry outside its OCP map add
/// `penalty` times the mean excursion, so the cost still slopes back towards
/// the feasible region. A failing simulation yields `penalty` itself. Both
/// cases set `penalized`.
pub fn rms_cost(
    theta: &[f64],
    problem: &IdentificationProblem,
    penalty: f64,
) -> Result<CostBreakdown> {
    if theta.len() != problem.parameters.len() {
        return Err(Error::Dimension {
            expected: problem.parameters.len(),
            got: theta.len(),
        });
    }
    if !problem.in_bounds(theta) {
        return Err(Error::Invalid(
            "theta outside the identification bounds".into(),
        ));
    }
    Ok(cost_unchecked(theta, problem, penalty))
}

fn cost_unchecked(theta: &[f64], problem: &IdentificationProblem, penalty: f64) -> CostBreakdown {
    match evaluate(problem, theta) {
        Ok((rv, rt, ex)) => {
            let fit = problem.weights.voltage * rv + problem.weights.temperature * rt;
            let total = fit + penalty * ex;
            if total.is_finite() {
                CostBreakdown {
                    total,
                    rms_voltage: rv,
                    rms_temperature: rt,
                    penalized: ex > 0.0,
                }
            } else {
                penalized(penalty)
            }
        }
        Err(_) => penalized(penalty),
    }
}

fn penalized(penalty: f64) -> CostBreakdown {
    CostBreakdown {
        total: penalty,
        rms_voltage: f64::NAN,
        rms_temperature: f64::NAN,
        penalized: true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub evaluation: usize,
    pub restart: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub key: String,
    pub cost_minus: f64,
    pub cost_plus: f64,
    /// Largest cost increase over the two perturbations.
    pub change: f64,
    pub flat: bool,
    /// False when the parameter trades off against others without changing
    /// the outputs, such as a porosity against its area.
    #[serde(default = "yes")]
    pub identifiable: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub schema: String,
    pub theta: BTreeMap<String, f64>,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Absent when the final simulation failed.
    pub rms_voltage: Option<f64>,
    pub rms_temperature: Option<f64>,
    pub evaluations: usize,
    pub penalized_evaluations: usize,
    pub converged: bool,
    pub trace: Vec<TracePoint>,
    pub sensitivity: Vec<Sensitivity>,
}

/// Cost change under ±`SENSITIVITY_STEP` relative perturbation of each
/// parameter around `theta`, clipped to the parameter bounds.
pub fn sensitivity(
    problem: &IdentificationProblem,
    theta: &[f64],
    penalty: f64,
) -> Vec<Sensitivity> {
    use rayon::prelude::*;
    let base = cost_unchecked(theta, problem, penalty).total;
    let mut rows: Vec<Sensitivity> = (0..theta.len())
        .into_par_iter()
        .map(|i| {
            let at = |f: f64| {
                let mut th = theta.to_vec();
                let spec = &problem.parameters[i];
                th[i] = (th[i] * f).clamp(spec.lower, spec.upper);
                cost_unchecked(&th, problem, penalty).total
            };
            let (m, p) = (at(1.0 - SENSITIVITY_STEP), at(1.0 + SENSITIVITY_STEP));
            Sensitivity {
                key: problem.parameters[i].key.clone(),
                cost_minus: m,
                cost_plus: p,
                change: (m - base).max(p - base).max(0.0),
                flat: false,
                identifiable: true,
            }
        })
        .collect();
    let max = rows.iter().map(|r| r.change).fold(0.0, f64::max);
    for r in &mut rows {
        r.flat = r.change < FLAT_FRACTION * max;
    }
    if let Some(unresolved) = null_directions(problem, theta, penalty) {
        for (r, u) in rows.iter_mut().zip(unresolved) {
            r.identifiable = !u;
        }
    }
    rows
}

/// Per parameter, whether it loads on a null direction of the residual
/// Jacobian in logarithmic coordinates. `None` when a probe fails.
fn null_directions(
    problem: &IdentificationProblem,
    theta: &[f64],
    penalty: f64,
) -> Option<Vec<bool>> {
    use nalgebra::{DMatrix, SymmetricEigen};
    use rayon::prelude::*;
    let n = theta.len();
    let cols: Vec<Option<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let at = |f: f64| {
                let mut th = theta.to_vec();
                th[j] *= f;
                residual_vector(problem, &th, penalty)
            };
            let (p, m) = (at((JACOBIAN_STEP).exp())?, at((-JACOBIAN_STEP).exp())?);
            Some(
                p.iter()
                    .zip(&m)
                    .map(|(a, b)| (a - b) / (2.0 * JACOBIAN_STEP))
                    .collect(),
            )
        })
        .collect();
    let cols: Vec<Vec<f64>> = cols.into_iter().collect::<Option<_>>()?;
    let m = cols[0].len();
    let jac = DMatrix::from_fn(m, n, |i, j| cols[j][i]);
    let eig = SymmetricEigen::new(jac.transpose() * &jac);
    let top = eig.eigenvalues.max().max(0.0);
    let mut out = vec![false; n];
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.max(0.0).sqrt() < NULL_RATIO * top.sqrt() {
            for (j, o) in out.iter_mut().enumerate() {
                *o |= eig.eigenvectors[(j, k)].abs() > NULL_LOADING;
            }
        }
    }
    Some(out)
}

/// Bound-constrained simplex minimization of `rms_cost` with seeded restarts.
///
/// Search runs in box coordinates, logarithmic for positive bounds. The first
/// start is `theta0`; each restart begins from a seeded random offset of the
/// best point so far with a fresh, smaller simplex. A Levenberg–Marquardt
/// pass on the per-sample residuals then polishes the best point. The
/// evaluation budget is shared by all stages; exhausting it returns the best
/// point with `converged = false`.
pub fn identify(
    problem: &IdentificationProblem,
    settings: &IdentifySettings,
) -> Result<(Vec<f64>, IdentificationReport)> {
    problem.validate()?;
    let theta0 = problem.theta0();
    let penalties = std::sync::atomic::AtomicUsize::new(0);
    let cost = |u: &[f64]| {
        let c = cost_unchecked(&problem.theta_from_unit(u), problem, settings.penalty);
        if c.penalized {
            penalties.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        }
        c.total
    };

    let initial = cost_unchecked(&theta0, problem, settings.penalty);
    let mut best_u = problem.to_unit(&theta0);
    let mut best_f = initial.total;
    let mut evaluations = 1usize;
    let mut trace = vec![TracePoint {
        evaluation: 1,
        restart: 0,
        cost: best_f,
    }];
    let mut converged = best_f <= settings.cost_floor;

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let refine_budget = settings
        .refine_evaluations
        .min(settings.max_evaluations / 2);
    let search_budget = settings.max_evaluations - refine_budget;
    let mut restart = 0;
    while !converged && restart < settings.restarts.max(1) && evaluations < search_budget {
        let (start, step) = if restart == 0 {
            (best_u.clone(), 0.1)
        } else {
            let s: Vec<f64> = best_u
                .iter()
                .map(|&u| (u + rng.random_range(-0.02..0.02)).clamp(0.0, 1.0))
                .collect();
            (s, 0.05 / restart as f64)
        };
        let opts = SimplexOptions {
            initial_step: step,
            max_evaluations: search_budget - evaluations,
            f_tol: settings.f_tol,
            x_tol: settings.x_tol,
        };
        let r = minimize_unit_box(cost, &start, &opts);
        let mut running = best_f;
        for &(e, c) in &r.trace {
            if c < running {
                running = c;
                trace.push(TracePoint {
                    evaluation: evaluations + e,
                    restart,
                    cost: c,
                });
            }
        }
        evaluations += r.evaluations;
        if r.f < best_f {
            best_f = r.f;
            best_u = r.x;
        }
        converged = r.converged && best_f <= settings.cost_floor;
        restart += 1;
    }
    if !converged && best_f.is_finite() {
        let budget = settings.max_evaluations.saturating_sub(evaluations);
        let res =
            |u: &[f64]| residual_vector(problem, &problem.theta_from_unit(u), settings.penalty);
        let r = levenberg_marquardt(res, &best_u, budget, settings.f_tol);
        evaluations += r.evaluations;
        let c = cost(&r.x);
        evaluations += 1;
        if c < best_f {
            best_f = c;
            best_u = r.x;
            trace.push(TracePoint {
                evaluation: evaluations,
                restart,
                cost: c,
            });
        }
        converged = r.evaluations < budget;
    }
    // Keep the exact starting point when nothing improved on it.
    let theta = if best_f < initial.total {
        problem.theta_from_unit(&best_u)
    } else {
        theta0.clone()
    };
    let fin = cost_unchecked(&theta, problem, settings.penalty);
    let sens = sensitivity(problem, &theta, settings.penalty);
    let report = IdentificationReport {
        schema: REPORT_SCHEMA.to_string(),
        theta: problem
            .parameters
            .iter()
            .zip(&theta)
            .map(|(s, &v)| (s.key.clone(), v))
            .collect(),
        initial_cost: initial.total,
        final_cost: fin.total,
        rms_voltage: Some(fin.rms_voltage).filter(|v| v.is_finite()),
        rms_temperature: Some(fin.rms_temperature).filter(|v| v.is_finite()),
        evaluations,
        penalized_evaluations: penalties.into_inner(),
        converged,
        trace,
        sensitivity: sens,
    };
    Ok((theta, report))
}

fn problem_schema() -> String {
    PROBLEM_SCHEMA.to_string()
}
fn default_spread() -> f64 {
    1.5
}

/// Data generated by simulating a scenario instead of loading records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    pub scenario: PathBuf,
}

/// JSON description of an identification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default = "problem_schema")]
    pub schema: String,
    /// Cell configuration supplying fixed parameters and default initial
    /// values; the built-in cell when absent.
    #[serde(default)]
    pub cell: Option<PathBuf>,
    /// Recorded cycles (CSV with metadata sidecar).
    #[serde(default)]
    pub records: Vec<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticData>,
    /// Free parameters; all identified keys around the cell values when empty.
    #[serde(default)]
    pub parameters: Vec<ParameterSpec>,
    /// Bound factor used when `parameters` is empty.
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default)]
    pub weights: CostWeights,
    #[serde(default)]
    pub voltage_temperature: VoltageTemperature,
    #[serde(default)]
    pub settings: IdentifySettings,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self> {
        let mut f: ProblemFile = read_json(path)?;
        if f.schema != PROBLEM_SCHEMA {
            return Err(Error::config(format!(
                "unsupported identification schema {:?}",
                f.schema
            )));
        }
        f.base_dir = path.parent().map(Path::to_path_buf);
        Ok(f)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn problem(&self) -> Result<IdentificationProblem> {
        let base = match &self.cell {
            Some(c) => CellParams::from_config_path(&self.resolve(c))?,
            None => CellParams::default(),
        };
        let mut data = self
            .records
            .iter()
            .map(|p| CycleRecord::load(&self.resolve(p)))
            .collect::<Result<Vec<_>>>()?;
        if let Some(s) = &self.synthetic {
            data.push(Scenario::load(&self.resolve(&s.scenario))?.simulate()?);
        }
        let mut problem = if self.parameters.is_empty() {
            let theta0: Vec<f64> = IDENTIFIED_KEYS
                .iter()
                .map(|k| base.get(k).expect("identified keys are scalar keys"))
                .collect();
            IdentificationProblem::standard(base, data, &theta0, self.spread)?
        } else {
            IdentificationProblem {
                base,
                data,
                parameters: self.parameters.clone(),
                weights: CostWeights::default(),
                voltage_temperature: VoltageTemperature::Model,
            }
        };
        problem.weights = self.weights;
        problem.voltage_temperature = self.voltage_temperature;
        problem.validate()?;
        Ok(problem)
    }
}

/// Identified parameters written back into a full cell configuration.
pub fn identified_params(problem: &IdentificationProblem, theta: &[f64]) -> Result<CellParams> {
    problem.params_at(theta)
}

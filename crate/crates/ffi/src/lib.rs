//! C ABI for cellguard.
//!
//! Objects cross the boundary as opaque handles created by `cg_*_new`,
//! `cg_*_load` or similar constructors and released by the matching
//! `cg_*_free`. Every fallible call returns a [`CgStatus`]; on failure the
//! message is available from [`cg_last_error`] on the same thread. Panics
//! never unwind into C: they are caught and reported as `CG_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use cellguard::gpr::{DatasetKind, GpArtifact, GpHyper, GpModel, UncertaintyDataset};
use cellguard::io::{read_json, read_text, write_json};
use cellguard::model::CellParams;
use cellguard::observer::{design_gain, verify_lyapunov};
use cellguard::plant::{run_cycle, CycleRecord, CycleSetup, Protocol};
use cellguard::scenario::Scenario;
use nalgebra::{DMatrix, DVector};

/// Result of a fallible call. Error classes share their numbers with the
/// command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStatus {
    CgOk = 0,
    /// Malformed configuration, JSON or CSV.
    CgConfig = 2,
    CgIo = 3,
    /// Stability guard, state outside a map's domain, or wrong dimensions.
    CgDomain = 4,
    /// Divergence or an iteration that did not terminate.
    CgDiverged = 5,
    CgConditioning = 6,
    /// Unobservable pair or a closed loop that is not Schur stable.
    CgUnobservable = 7,
    CgGate = 8,
    CgInvalid = 9,
    CgNullPointer = 10,
    CgInvalidUtf8 = 11,
    CgPanic = 12,
}

/// Cell parameter set.
pub struct CgParams(CellParams);

/// Simulated or loaded cycle record.
pub struct CgRecord(CycleRecord);

/// Fitted Gaussian process mismatch model.
pub struct CgGp(GpModel);

/// One record sample. Fault channels are the injected ground truth.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CgSample {
    pub t: f64,
    /// Current (A), positive on discharge.
    pub current: f64,
    pub v_meas: f64,
    pub t_meas: f64,
    pub v_true: f64,
    pub t_true: f64,
    pub fault_voltage: f64,
    pub fault_power: f64,
}

/// Lyapunov certificate of one closed loop at one `gamma`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CgCertificate {
    pub passed: bool,
    pub margin: f64,
    pub lambda_p_min: f64,
    pub lambda_p_max: f64,
    pub spectral_radius: f64,
    /// Largest `gamma` at which the margin is negative.
    pub critical_gamma: f64,
}

/// Detection outcome of a scenario. Absent times are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CgOutcome {
    pub onset: f64,
    pub voltage_latency: f64,
    pub thermal_latency: f64,
    pub voltage_false_alarms: usize,
    pub thermal_false_alarms: usize,
    pub max_abs_r_v: f64,
    pub max_abs_r_t: f64,
}

struct Failure {
    status: CgStatus,
    message: String,
}

impl Failure {
    fn new(status: CgStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn null(what: &str) -> Self {
        Self::new(CgStatus::CgNullPointer, format!("{what} is null"))
    }
}

impl From<cellguard::Error> for Failure {
    fn from(e: cellguard::Error) -> Self {
        let status = match e.exit_code() {
            2 => CgStatus::CgConfig,
            3 => CgStatus::CgIo,
            4 => CgStatus::CgDomain,
            5 => CgStatus::CgDiverged,
            6 => CgStatus::CgConditioning,
            7 => CgStatus::CgUnobservable,
            8 => CgStatus::CgGate,
            _ => CgStatus::CgInvalid,
        };
        Self::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

/// Runs `f`, converting failures and panics into a status.
fn guard<F>(f: F) -> CgStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CgStatus::CgOk,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            CgStatus::CgPanic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(CgStatus::CgInvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn path(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    text(p, what).map(PathBuf::from)
}

unsafe fn reference<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Stores `value` behind `out` as a new handle.
unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("out"));
    }
    *out = value;
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn or_nan(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failure on this thread, or NULL if none.
/// Valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn cg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static name of a status code; "unknown" for values outside [`CgStatus`].
#[no_mangle]
pub extern "C" fn cg_status_name(status: i32) -> *const c_char {
    let name: &'static str = match status {
        0 => "ok\0",
        2 => "config\0",
        3 => "io\0",
        4 => "domain\0",
        5 => "diverged\0",
        6 => "conditioning\0",
        7 => "unobservable\0",
        8 => "gate\0",
        9 => "invalid\0",
        10 => "null pointer\0",
        11 => "invalid utf-8\0",
        12 => "panic\0",
        _ => "unknown\0",
    };
    name.as_ptr().cast()
}

/// Default cell parameters.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_params_new(out: *mut *mut CgParams) -> CgStatus {
    guard(|| emit(out, CgParams(CellParams::default())))
}

/// Parameters from `key = value` configuration text.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_params_parse(
    config: *const c_char,
    out: *mut *mut CgParams,
) -> CgStatus {
    guard(|| {
        let p = CellParams::from_config_str(text(config, "config")?, None)?;
        emit(out, CgParams(p))
    })
}

/// Parameters from a configuration file.
///
/// # Safety
/// `file` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_params_load(file: *const c_char, out: *mut *mut CgParams) -> CgStatus {
    guard(|| {
        let file = path(file, "file")?;
        let p = CellParams::from_config_str(&read_text(&file)?, file.parent())?;
        emit(out, CgParams(p))
    })
}

/// Reads one scalar parameter by name.
///
/// # Safety
/// `params` must come from a `cg_params_*` constructor; `key` must be a
/// NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_params_get(
    params: *const CgParams,
    key: *const c_char,
    out: *mut f64,
) -> CgStatus {
    guard(|| {
        let key = text(key, "key")?;
        let v = reference(params, "params")?.0.get(key).ok_or_else(|| {
            Failure::new(CgStatus::CgConfig, format!("unknown parameter {key:?}"))
        })?;
        write(out, v)
    })
}

/// Sets one scalar parameter by name and revalidates the set.
///
/// # Safety
/// `params` must come from a `cg_params_*` constructor; `key` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cg_params_set(
    params: *mut CgParams,
    key: *const c_char,
    value: f64,
) -> CgStatus {
    guard(|| {
        let key = text(key, "key")?;
        let p = params.as_mut().ok_or_else(|| Failure::null("params"))?;
        let mut next = p.0.clone();
        next.set(key, value)?;
        next.validate()?;
        p.0 = next;
        Ok(())
    })
}

/// # Safety
/// `params` must be NULL or come from a `cg_params_*` constructor and not
/// have been freed.
#[no_mangle]
pub unsafe extern "C" fn cg_params_free(params: *mut CgParams) {
    release(params)
}

/// Simulates a noise-free constant-current cycle (positive `current`
/// discharges) from `initial_soc` at ambient temperature.
///
/// # Safety
/// `params` must come from a `cg_params_*` constructor; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_record_simulate(
    params: *const CgParams,
    current: f64,
    duration: f64,
    initial_soc: f64,
    seed: u64,
    out: *mut *mut CgRecord,
) -> CgStatus {
    guard(|| {
        let p = reference(params, "params")?.0.clone();
        let mut setup = CycleSetup::new(
            p,
            Protocol::constant_current(current).with_duration(duration),
        );
        setup.initial_soc = initial_soc;
        setup.seed = seed;
        emit(out, CgRecord(run_cycle(&setup)?))
    })
}

/// Simulates the detection cycle of a scenario file.
///
/// # Safety
/// `scenario` must be a NUL-terminated string; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn cg_scenario_simulate(
    scenario: *const c_char,
    out: *mut *mut CgRecord,
) -> CgStatus {
    guard(|| {
        let s = Scenario::load(&path(scenario, "scenario")?)?;
        emit(out, CgRecord(s.simulate()?))
    })
}

/// Learns, calibrates and detects on a scenario file.
///
/// # Safety
/// `scenario` must be a NUL-terminated string; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn cg_scenario_run(scenario: *const c_char, out: *mut CgOutcome) -> CgStatus {
    guard(|| {
        let s = Scenario::load(&path(scenario, "scenario")?)?;
        let o = s.run()?.summary;
        write(
            out,
            CgOutcome {
                onset: or_nan(o.onset),
                voltage_latency: or_nan(o.voltage_latency),
                thermal_latency: or_nan(o.thermal_latency),
                voltage_false_alarms: o.voltage_false_alarms,
                thermal_false_alarms: o.thermal_false_alarms,
                max_abs_r_v: o.max_abs_r_v,
                max_abs_r_t: o.max_abs_r_t,
            },
        )
    })
}

/// Loads a record CSV and its metadata sidecar.
///
/// # Safety
/// `file` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_record_load(file: *const c_char, out: *mut *mut CgRecord) -> CgStatus {
    guard(|| emit(out, CgRecord(CycleRecord::load(&path(file, "file")?)?)))
}

/// Writes a record CSV and its metadata sidecar.
///
/// # Safety
/// `record` must come from a `cg_record_*` constructor; `file` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cg_record_save(record: *const CgRecord, file: *const c_char) -> CgStatus {
    guard(|| {
        let r = reference(record, "record")?;
        r.0.save(&path(file, "file")?)?;
        Ok(())
    })
}

/// Number of samples, or 0 for NULL.
///
/// # Safety
/// `record` must be NULL or come from a `cg_record_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn cg_record_len(record: *const CgRecord) -> usize {
    record.as_ref().map_or(0, |r| r.0.len())
}

/// Copies sample `index` into `out`.
///
/// # Safety
/// `record` must come from a `cg_record_*` constructor; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_record_sample(
    record: *const CgRecord,
    index: usize,
    out: *mut CgSample,
) -> CgStatus {
    guard(|| {
        let r = reference(record, "record")?;
        let s = r.0.samples.get(index).ok_or_else(|| {
            Failure::new(
                CgStatus::CgDomain,
                format!("sample {index} out of range for {} samples", r.0.len()),
            )
        })?;
        write(
            out,
            CgSample {
                t: s.t,
                current: s.current,
                v_meas: s.v_meas,
                t_meas: s.t_meas,
                v_true: s.v_true,
                t_true: s.t_true,
                fault_voltage: s.fault_voltage,
                fault_power: s.fault_power,
            },
        )
    })
}

/// # Safety
/// `record` must be NULL or come from a `cg_record_*` constructor and not
/// have been freed.
#[no_mangle]
pub unsafe extern "C" fn cg_record_free(record: *mut CgRecord) {
    release(record)
}

/// Fits a Gaussian process to `n` row-major inputs of width `dim` (2 for
/// the voltage model, 3 for the thermal model) with the given
/// hyperparameters; `length_scales` has `dim` entries.
///
/// # Safety
/// `inputs` must hold `n * dim` values, `labels` `n` values and
/// `length_scales` `dim` values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_gp_fit(
    inputs: *const f64,
    labels: *const f64,
    n: usize,
    dim: usize,
    sigma_p2: f64,
    length_scales: *const f64,
    jitter: f64,
    out: *mut *mut CgGp,
) -> CgStatus {
    guard(|| {
        let kind = match dim {
            2 => DatasetKind::Voltage,
            3 => DatasetKind::Thermal,
            _ => {
                return Err(Failure::new(
                    CgStatus::CgDomain,
                    format!("input width {dim} is neither 2 nor 3"),
                ))
            }
        };
        let flat = slice(inputs, n * dim, "inputs")?;
        let data = UncertaintyDataset {
            kind,
            inputs: flat.chunks(dim).map(<[f64]>::to_vec).collect(),
            labels: slice(labels, n, "labels")?.to_vec(),
            source_cycle: 0,
        };
        let hyper = GpHyper {
            sigma_p2,
            length_scales: slice(length_scales, dim, "length_scales")?.to_vec(),
            jitter,
        };
        emit(out, CgGp(GpModel::fit(&data, &hyper, n.max(1))?))
    })
}

/// Loads a GP artifact written by the learn command or [`cg_gp_save`].
///
/// # Safety
/// `file` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_gp_load(file: *const c_char, out: *mut *mut CgGp) -> CgStatus {
    guard(|| {
        let a: GpArtifact = read_json(&path(file, "file")?)?;
        emit(out, CgGp(GpModel::from_artifact(&a)?))
    })
}

/// Writes a GP artifact tagged with `version`.
///
/// # Safety
/// `gp` must come from a `cg_gp_*` constructor; `file` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cg_gp_save(
    gp: *const CgGp,
    version: u64,
    file: *const c_char,
) -> CgStatus {
    guard(|| {
        let g = reference(gp, "gp")?;
        write_json(&path(file, "file")?, &g.0.to_artifact(version))?;
        Ok(())
    })
}

/// Input width, or 0 for NULL.
///
/// # Safety
/// `gp` must be NULL or come from a `cg_gp_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn cg_gp_dim(gp: *const CgGp) -> usize {
    gp.as_ref().map_or(0, |g| g.0.hyper().length_scales.len())
}

/// Posterior mean and variance at one query point of width `dim`.
///
/// # Safety
/// `gp` must come from a `cg_gp_*` constructor; `query` must hold `dim`
/// values; `mean` and `variance` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_gp_predict(
    gp: *const CgGp,
    query: *const f64,
    dim: usize,
    mean: *mut f64,
    variance: *mut f64,
) -> CgStatus {
    guard(|| {
        let g = reference(gp, "gp")?;
        let (m, v) = g.0.predict(slice(query, dim, "query")?)?;
        if variance.is_null() {
            return Err(Failure::null("variance"));
        }
        write(mean, m)?;
        write(variance, v)
    })
}

/// # Safety
/// `gp` must be NULL or come from a `cg_gp_*` constructor and not have been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn cg_gp_free(gp: *mut CgGp) {
    release(gp)
}

unsafe fn system(
    a: *const f64,
    c: *const f64,
    n: usize,
) -> Result<(DMatrix<f64>, DVector<f64>), Failure> {
    if n == 0 {
        return Err(Failure::new(CgStatus::CgDomain, "state dimension is zero"));
    }
    Ok((
        DMatrix::from_row_slice(n, n, slice(a, n * n, "a")?),
        DVector::from_column_slice(slice(c, n, "c")?),
    ))
}

/// Observer gain placing the eigenvalues of `A - L C` at `spectrum`.
/// `a` is row-major `n × n`; `c`, `spectrum` and `gain_out` hold `n` values.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn cg_design_gain(
    a: *const f64,
    c: *const f64,
    spectrum: *const f64,
    n: usize,
    gain_out: *mut f64,
) -> CgStatus {
    guard(|| {
        let (a, c) = system(a, c, n)?;
        let l = design_gain(&a, &c, slice(spectrum, n, "spectrum")?)?;
        if gain_out.is_null() {
            return Err(Failure::null("gain_out"));
        }
        std::slice::from_raw_parts_mut(gain_out, n).copy_from_slice(l.as_slice());
        Ok(())
    })
}

/// Lyapunov certificate of the closed loop `A - L C` at `gamma`.
/// `a` is row-major `n × n`; `c` and `gain` hold `n` values.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn cg_verify_lyapunov(
    a: *const f64,
    c: *const f64,
    gain: *const f64,
    n: usize,
    gamma: f64,
    out: *mut CgCertificate,
) -> CgStatus {
    guard(|| {
        let (a, c) = system(a, c, n)?;
        let l = DVector::from_column_slice(slice(gain, n, "gain")?);
        let r = verify_lyapunov(&a, &c, &l, gamma)?;
        write(
            out,
            CgCertificate {
                passed: r.passed,
                margin: r.margin,
                lambda_p_min: r.lambda_p_min,
                lambda_p_max: r.lambda_p_max,
                spectral_radius: r.spectral_radius,
                critical_gamma: r.critical_gamma(),
            },
        )
    })
}

//! The C ABI exercised from Rust, compared against the library it wraps.

use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use cellguard::gpr::{DatasetKind, GpHyper, GpModel, UncertaintyDataset};
use cellguard::model::CellParams;
use cellguard::plant::{run_cycle, CycleSetup, Protocol};
use cellguard_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = cg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn params() -> *mut CgParams {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { cg_params_new(&mut p) }, CgStatus::CgOk);
    p
}

#[test]
fn version_and_status_names_are_static_strings() {
    let v = unsafe { CStr::from_ptr(cg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let name = |s| {
        unsafe { CStr::from_ptr(cg_status_name(s)) }
            .to_str()
            .unwrap()
    };
    assert_eq!(name(CgStatus::CgGate as i32), "gate");
    assert_eq!(name(-7), "unknown");
}

#[test]
fn parameters_read_write_and_validate() {
    let p = params();
    let mut v = 0.0;
    assert_eq!(
        unsafe { cg_params_get(p, c("R_b").as_ptr(), &mut v) },
        CgStatus::CgOk
    );
    assert_eq!(v, CellParams::default().R_b);
    assert_eq!(
        unsafe { cg_params_set(p, c("R_b").as_ptr(), 0.05) },
        CgStatus::CgOk
    );
    unsafe { cg_params_get(p, c("R_b").as_ptr(), &mut v) };
    assert_eq!(v, 0.05);

    let s = unsafe { cg_params_get(p, c("no_such").as_ptr(), &mut v) };
    assert_eq!(s, CgStatus::CgConfig);
    assert!(last_error().contains("no_such"));

    // A rejected value leaves the set unchanged.
    assert_ne!(
        unsafe { cg_params_set(p, c("eps_c").as_ptr(), 1.5) },
        CgStatus::CgOk
    );
    unsafe { cg_params_get(p, c("eps_c").as_ptr(), &mut v) };
    assert_eq!(v, CellParams::default().eps_c);

    assert_eq!(
        unsafe { cg_params_get(ptr::null(), c("R_b").as_ptr(), &mut v) },
        CgStatus::CgNullPointer
    );
    assert_eq!(
        unsafe { cg_params_get(p, ptr::null(), &mut v) },
        CgStatus::CgNullPointer
    );
    unsafe { cg_params_free(p) };
    unsafe { cg_params_free(ptr::null_mut()) };
}

#[test]
fn parameters_parse_from_text_and_file() {
    let base = CellParams {
        h_conv: 12.5,
        ..Default::default()
    };
    let text = base.to_config_string();
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { cg_params_parse(c(&text).as_ptr(), &mut p) },
        CgStatus::CgOk
    );
    let mut v = 0.0;
    unsafe { cg_params_get(p, c("h_conv").as_ptr(), &mut v) };
    assert_eq!(v, 12.5);
    unsafe { cg_params_free(p) };

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cell.cfg");
    std::fs::write(&file, &text).unwrap();
    let mut q = ptr::null_mut();
    assert_eq!(
        unsafe { cg_params_load(c(file.to_str().unwrap()).as_ptr(), &mut q) },
        CgStatus::CgOk
    );
    unsafe { cg_params_free(q) };

    let mut bad = ptr::null_mut();
    let s = unsafe { cg_params_parse(c("D = banana\n").as_ptr(), &mut bad) };
    assert_eq!(s, CgStatus::CgConfig);
    assert!(bad.is_null());
    let s = unsafe { cg_params_load(c("/no/such/cell.cfg").as_ptr(), &mut bad) };
    assert_eq!(s, CgStatus::CgIo);
}

#[test]
fn simulated_record_matches_the_library() {
    let p = params();
    let mut rec = ptr::null_mut();
    let s = unsafe { cg_record_simulate(p, 2.0, 120.0, 0.7, 9, &mut rec) };
    assert_eq!(s, CgStatus::CgOk, "{}", last_error());

    let mut setup = CycleSetup::new(
        CellParams::default(),
        Protocol::constant_current(2.0).with_duration(120.0),
    );
    setup.initial_soc = 0.7;
    setup.seed = 9;
    let reference = run_cycle(&setup).unwrap();
    assert_eq!(unsafe { cg_record_len(rec) }, reference.len());
    let mut sample = CgSample::default();
    for (i, want) in reference.samples.iter().enumerate() {
        assert_eq!(
            unsafe { cg_record_sample(rec, i, &mut sample) },
            CgStatus::CgOk
        );
        assert_eq!(sample.t, want.t);
        assert_eq!(sample.v_meas, want.v_meas);
        assert_eq!(sample.t_meas, want.t_meas);
    }
    let s = unsafe { cg_record_sample(rec, reference.len(), &mut sample) };
    assert_eq!(s, CgStatus::CgDomain);

    let dir = tempfile::tempdir().unwrap();
    let file = c(dir.path().join("r.csv").to_str().unwrap());
    assert_eq!(
        unsafe { cg_record_save(rec, file.as_ptr()) },
        CgStatus::CgOk
    );
    let mut back = ptr::null_mut();
    assert_eq!(
        unsafe { cg_record_load(file.as_ptr(), &mut back) },
        CgStatus::CgOk
    );
    assert_eq!(unsafe { cg_record_len(back) }, reference.len());
    assert_eq!(unsafe { cg_record_len(ptr::null()) }, 0);

    // Discharging an empty cell leaves the open-circuit map's domain.
    let mut empty = ptr::null_mut();
    let s = unsafe { cg_record_simulate(p, 2.0, 120.0, 0.0, 9, &mut empty) };
    assert_eq!(s, CgStatus::CgDomain);
    unsafe {
        cg_record_free(rec);
        cg_record_free(back);
        cg_params_free(p);
    }
}

#[test]
fn gaussian_process_matches_the_library() {
    let inputs = [0.0, 3.6, 1.0, 3.7, 2.0, 3.9, -1.0, 3.5];
    let labels = [0.01, -0.02, 0.03, 0.0];
    let scales = [1.0, 0.5];
    let mut gp = ptr::null_mut();
    let s = unsafe {
        cg_gp_fit(
            inputs.as_ptr(),
            labels.as_ptr(),
            4,
            2,
            1e-3,
            scales.as_ptr(),
            1e-9,
            &mut gp,
        )
    };
    assert_eq!(s, CgStatus::CgOk, "{}", last_error());
    assert_eq!(unsafe { cg_gp_dim(gp) }, 2);

    let data = UncertaintyDataset {
        kind: DatasetKind::Voltage,
        inputs: inputs.chunks(2).map(<[f64]>::to_vec).collect(),
        labels: labels.to_vec(),
        source_cycle: 0,
    };
    let hyper = GpHyper {
        sigma_p2: 1e-3,
        length_scales: scales.to_vec(),
        jitter: 1e-9,
    };
    let reference = GpModel::fit(&data, &hyper, 4).unwrap();
    let q = [0.5, 3.65];
    let (mut m, mut v) = (0.0, 0.0);
    assert_eq!(
        unsafe { cg_gp_predict(gp, q.as_ptr(), 2, &mut m, &mut v) },
        CgStatus::CgOk
    );
    assert_eq!((m, v), reference.predict(&q).unwrap());

    let s = unsafe { cg_gp_predict(gp, q.as_ptr(), 1, &mut m, &mut v) };
    assert_eq!(s, CgStatus::CgDomain);
    let s = unsafe { cg_gp_predict(gp, q.as_ptr(), 2, &mut m, ptr::null_mut()) };
    assert_eq!(s, CgStatus::CgNullPointer);

    let dir = tempfile::tempdir().unwrap();
    let file = c(dir.path().join("gp.json").to_str().unwrap());
    assert_eq!(unsafe { cg_gp_save(gp, 4, file.as_ptr()) }, CgStatus::CgOk);
    let mut back = ptr::null_mut();
    assert_eq!(
        unsafe { cg_gp_load(file.as_ptr(), &mut back) },
        CgStatus::CgOk
    );
    let (mut m2, mut v2) = (0.0, 0.0);
    unsafe { cg_gp_predict(back, q.as_ptr(), 2, &mut m2, &mut v2) };
    assert_eq!((m2, v2), (m, v));

    let mut bad = ptr::null_mut();
    let s = unsafe {
        cg_gp_fit(
            inputs.as_ptr(),
            labels.as_ptr(),
            2,
            4,
            1e-3,
            scales.as_ptr(),
            1e-9,
            &mut bad,
        )
    };
    assert_eq!(s, CgStatus::CgDomain);
    unsafe {
        cg_gp_free(gp);
        cg_gp_free(back);
    }
}

#[test]
fn gain_design_and_certificate() {
    // Row-major A and output C for a two-state system.
    let a = [0.9, 0.1, 0.0, 0.8];
    let cvec = [1.0, 0.0];
    let spectrum = [0.3, 0.5];
    let mut gain = [0.0; 2];
    let s = unsafe {
        cg_design_gain(
            a.as_ptr(),
            cvec.as_ptr(),
            spectrum.as_ptr(),
            2,
            gain.as_mut_ptr(),
        )
    };
    assert_eq!(s, CgStatus::CgOk, "{}", last_error());

    let mut cert = CgCertificate::default();
    let s =
        unsafe { cg_verify_lyapunov(a.as_ptr(), cvec.as_ptr(), gain.as_ptr(), 2, 1e-6, &mut cert) };
    assert_eq!(s, CgStatus::CgOk);
    assert!(cert.passed && cert.margin < 0.0);
    assert!((cert.spectral_radius - 0.5).abs() < 1e-9);
    assert!(cert.critical_gamma > 1e-6);

    let s = unsafe {
        cg_verify_lyapunov(
            a.as_ptr(),
            cvec.as_ptr(),
            gain.as_ptr(),
            2,
            cert.critical_gamma * 2.0,
            &mut cert,
        )
    };
    assert_eq!(s, CgStatus::CgOk);
    assert!(!cert.passed);

    let zero = [0.0; 2];
    let unstable = [1.5, 0.0, 0.0, 0.5];
    let s = unsafe {
        cg_verify_lyapunov(
            unstable.as_ptr(),
            cvec.as_ptr(),
            zero.as_ptr(),
            2,
            1.0,
            &mut cert,
        )
    };
    assert_eq!(s, CgStatus::CgUnobservable);
    let s =
        unsafe { cg_verify_lyapunov(a.as_ptr(), cvec.as_ptr(), gain.as_ptr(), 0, 1.0, &mut cert) };
    assert_eq!(s, CgStatus::CgDomain);
}

#[test]
fn scenario_outcome_reports_latency() {
    let file =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios/voltage_fault_case1.json");
    let mut out = CgOutcome::default();
    let s = unsafe { cg_scenario_run(c(file.to_str().unwrap()).as_ptr(), &mut out) };
    assert_eq!(s, CgStatus::CgOk, "{}", last_error());
    assert_eq!(out.onset, 300.0);
    assert_eq!(out.voltage_latency, 17.0);
    assert!(out.thermal_latency.is_nan());
    assert_eq!(out.voltage_false_alarms + out.thermal_false_alarms, 0);

    let mut rec = ptr::null_mut();
    let s = unsafe { cg_scenario_simulate(c(file.to_str().unwrap()).as_ptr(), &mut rec) };
    assert_eq!(s, CgStatus::CgOk);
    assert!(unsafe { cg_record_len(rec) } > 900);
    unsafe { cg_record_free(rec) };

    let bad = [0xffu8, 0xfe, 0];
    let s = unsafe { cg_scenario_run(bad.as_ptr().cast(), &mut out) };
    assert_eq!(s, CgStatus::CgInvalidUtf8);
}

/// The generated header compiles as C99 and C++ when a compiler is present.
#[test]
fn header_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cellguard.h");
    assert!(header.exists(), "build script did not write the header");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "cg_verify_lyapunov",
        "cg_gp_predict",
        "cg_last_error",
        "CG_PANIC",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ CgParams *p = 0; double v; \
             return cg_params_new(&p) == CG_OK && cg_params_get(p, \"D\", &v) == CG_OK; }}\n",
            header.display()
        ),
    )
    .unwrap();
    for (compiler, std) in [("cc", "-std=c99"), ("c++", "-std=c++11")] {
        let mut cmd = std::process::Command::new(compiler);
        if compiler == "c++" {
            cmd.args(["-x", "c++"]);
        }
        match cmd
            .args([std, "-Wall", "-Werror", "-fsyntax-only"])
            .arg(&src)
            .output()
        {
            Ok(o) => assert!(
                o.status.success(),
                "{compiler}: {}",
                String::from_utf8_lossy(&o.stderr)
            ),
            Err(_) => eprintln!("{compiler} not available; skipped"),
        }
    }
}

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};

use cellguard::artifacts::{
    check_file, load_models, residuals_csv, save_models, write_text, DecisionReport, LedgerFile,
    VerificationFile, DECISION_SCHEMA, LEDGER_FILE, LEDGER_SCHEMA, VERIFICATION_SCHEMA,
};
use cellguard::campaign::{run_campaign, summary_table, write_summary, Campaign};
use cellguard::detector::{decide, lifetime_update, LearnedModels, Thresholds};
use cellguard::identify::{identified_params, identify, ProblemFile};
use cellguard::io::write_json;
use cellguard::linalg::spectral_radius;
use cellguard::observer::{closed_loop, covering_gamma_grid, gamma_sweep, SweepReport};
use cellguard::pipeline::DetectionSetup;
use cellguard::plant::CycleRecord;
use cellguard::scenario::{summarize, Scenario};
use cellguard::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cellguard",
    version,
    about = "Battery voltage and thermal fault detection"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "CELLGUARD_OUT", default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario's detection cycle and write the record.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the observers and decision maker over a record.
    Detect {
        #[arg(long)]
        scenario: PathBuf,
        /// Record CSV; the scenario is simulated when omitted.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Directory holding the learned models.
        #[arg(long)]
        models: Option<PathBuf>,
        /// Thresholds file overriding the scenario's source.
        #[arg(long)]
        thresholds: Option<PathBuf>,
    },
    /// Set thresholds from fault-free cycles.
    Calibrate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 40)]
        cycles: usize,
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Fit the mismatch models. With a record, the record must pass
    /// detection first; otherwise the scenario's training cycles are used.
    Learn {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        thresholds: Option<PathBuf>,
    },
    /// Identify cell parameters from recorded or synthetic data.
    Identify {
        #[arg(long)]
        problem: PathBuf,
    },
    /// Certify the observer gains and print the Γ sweep.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run a campaign of scenarios in parallel.
    Campaign {
        #[arg(long)]
        file: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, env = "CELLGUARD_WORKERS", default_value_t = 0)]
        workers: usize,
    },
    /// Validate artifacts against their schemas.
    SchemaCheck {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn scenario_dir(out: &Path, s: &Scenario) -> PathBuf {
    match &s.output_dir {
        Some(d) => s.resolve_path(d),
        None => out.join(&s.name),
    }
}

fn load_record_or_simulate(s: &Scenario, record: Option<&Path>) -> Result<CycleRecord> {
    match record {
        Some(p) => CycleRecord::load(p),
        None => s.simulate(),
    }
}

fn models_dir(dir: &Path, models: Option<PathBuf>) -> PathBuf {
    models.unwrap_or_else(|| dir.join("models"))
}

fn thresholds_for(
    s: &Scenario,
    setup: &DetectionSetup,
    models: &LearnedModels,
    file: Option<&Path>,
) -> Result<Thresholds> {
    match file {
        Some(p) => Thresholds::load(p),
        None => s.thresholds(setup, models),
    }
}

/// Samples until the slower observer's transient falls to 0.1%.
fn settling_steps(setup: &DetectionSetup) -> usize {
    let rho_v = spectral_radius(&closed_loop(
        &setup.ss.a1,
        &setup.ss.c1,
        &setup.gains.voltage_vec(),
    ));
    let rho_t = spectral_radius(&closed_loop(
        &setup.ss.a2,
        &setup.ss.c2,
        &setup.gains.thermal_vec(),
    ));
    let rho = rho_v.max(rho_t);
    if rho <= 0.0 {
        1
    } else if rho >= 1.0 {
        usize::MAX
    } else {
        (1e-3f64.ln() / rho.ln()).ceil() as usize
    }
}

fn simulate(out: &Path, scenario: &Path, seed: Option<u64>) -> Result<()> {
    let mut s = Scenario::load(scenario)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let rec = s.simulate()?;
    let path = scenario_dir(out, &s).join("record.csv");
    rec.save(&path)?;
    println!("{} samples -> {}", rec.len(), path.display());
    Ok(())
}

fn detect(
    out: &Path,
    scenario: &Path,
    record: Option<PathBuf>,
    models: Option<PathBuf>,
    thresholds: Option<PathBuf>,
) -> Result<()> {
    let s = Scenario::load(scenario)?;
    let dir = scenario_dir(out, &s);
    let setup = s.detection_setup()?;
    let (models, warnings) = load_models(&models_dir(&dir, models))?;
    for w in &warnings {
        warn!("{w}");
    }
    let th = thresholds_for(&s, &setup, &models, thresholds.as_deref())?;
    let rec = load_record_or_simulate(&s, record.as_deref())?;
    let residuals = setup.residuals(&rec, &models)?;
    let decision = decide(&residuals, &th, s.persistence);
    let settle = settling_steps(&setup);
    let report = DecisionReport {
        schema: DECISION_SCHEMA.into(),
        scenario: s.name.clone(),
        record,
        samples: rec.len(),
        thresholds: th.clone(),
        fault_detected: decision.any_fault(),
        first_voltage_alarm: decision.first_voltage,
        first_thermal_alarm: decision.first_thermal,
        summary: summarize(&decision, &residuals, s.onset()),
        settling_steps: settle,
        settled: rec.len() >= settle,
        learned_models: models.voltage.is_some() || models.thermal.is_some(),
        warnings,
    };
    write_text(
        &dir.join("residuals.csv"),
        &residuals_csv(&residuals, &decision, &th),
    )?;
    write_json(&dir.join("decision.json"), &report)?;
    println!(
        "fault detected: {} (first V alarm {:?}, first T alarm {:?})",
        report.fault_detected, report.first_voltage_alarm, report.first_thermal_alarm
    );
    if !report.settled {
        warn!(
            "record ({} samples) is shorter than the observer settling window ({settle} samples)",
            rec.len()
        );
    }
    Ok(())
}

fn calibrate(out: &Path, scenario: &Path, cycles: usize, models: Option<PathBuf>) -> Result<()> {
    let s = Scenario::load(scenario)?;
    let dir = scenario_dir(out, &s);
    let setup = s.detection_setup()?;
    let mdir = models_dir(&dir, models);
    let models = if mdir.join(cellguard::artifacts::VOLTAGE_MODEL_FILE).exists() {
        load_models(&mdir)?.0
    } else {
        info!(
            "no stored models in {}; learning from the training cycles",
            mdir.display()
        );
        s.learn(&setup)?
    };
    let th = s.calibrate(&setup, &models, cycles)?;
    let path = dir.join("thresholds.cfg");
    th.save(&path)?;
    println!(
        "delta_V = {}, delta_T = {} -> {}",
        th.delta_v,
        th.delta_t,
        path.display()
    );
    Ok(())
}

fn learn(
    out: &Path,
    scenario: &Path,
    record: Option<PathBuf>,
    models: Option<PathBuf>,
    thresholds: Option<PathBuf>,
) -> Result<()> {
    let s = Scenario::load(scenario)?;
    let dir = scenario_dir(out, &s);
    let setup = s.detection_setup()?;
    let mdir = models_dir(&dir, models);
    let ledger_path = mdir.join(LEDGER_FILE);
    let mut ledger = LedgerFile::load_or_new(&ledger_path)?;
    let (mut current, _) = load_models(&mdir)?;
    match record {
        None => {
            let m = s.learn(&setup)?;
            save_models(&mdir, &m)?;
            println!(
                "fitted on {} fault-free training cycle(s) -> {}",
                s.training.cycles,
                mdir.display()
            );
        }
        Some(path) => {
            let rec = CycleRecord::load(&path)?;
            let th = thresholds_for(&s, &setup, &current, thresholds.as_deref())?;
            let (_, decision) = setup.detect(&rec, &current, &th, s.persistence)?;
            if decision.any_fault() {
                return Err(Error::Gate(format!(
                    "{} was flagged faulty (first V alarm {:?}, first T alarm {:?}); \
                     only fault-free cycles may train the models",
                    path.display(),
                    decision.first_voltage,
                    decision.first_thermal
                )));
            }
            let entry = lifetime_update(
                &mut ledger.ledger,
                &mut current,
                &rec,
                &decision,
                &setup,
                &s.learning,
            )?;
            save_models(&mdir, &current)?;
            ledger.schema = LEDGER_SCHEMA.into();
            write_json(&ledger_path, &ledger)?;
            println!(
                "cycle {} accepted; models version {} -> {}",
                entry.cycle,
                entry.artifact_version,
                mdir.display()
            );
        }
    }
    Ok(())
}

fn identify_cmd(out: &Path, problem: &Path) -> Result<()> {
    let file = ProblemFile::load(problem)?;
    let pr = file.problem()?;
    let (theta, report) = identify(&pr, &file.settings)?;
    let stem = problem
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "identify".into());
    let dir = out.join(stem);
    write_json(&dir.join("identify_report.json"), &report)?;
    let cfg = identified_params(&pr, &theta)?.to_config_string();
    write_text(&dir.join("identified.cfg"), &cfg)?;
    println!(
        "cost {:e} -> {:e} in {} evaluations (converged: {})",
        report.initial_cost, report.final_cost, report.evaluations, report.converged
    );
    for (k, v) in &report.theta {
        println!("  {k:<8} {v:e}");
    }
    for s in report.sensitivity.iter().filter(|s| s.flat) {
        println!("  {} is flat: excluded from accuracy claims", s.key);
    }
    let traded: Vec<&str> = report
        .sensitivity
        .iter()
        .filter(|s| !s.identifiable)
        .map(|s| s.key.as_str())
        .collect();
    if !traded.is_empty() {
        println!(
            "  not identifiable (trade off against each other): {}",
            traded.join(", ")
        );
    }
    Ok(())
}

fn print_sweep(label: &str, r: &SweepReport) {
    println!("{label} observer (critical gamma {:.4e})", r.critical_gamma);
    println!(
        "  {:>10}  {:>12}  {:>6}  {:>12}",
        "gamma", "margin", "pass", "radius/|eta|"
    );
    for row in &r.rows {
        println!(
            "  {:>10.4e}  {:>12.4e}  {:>6}  {:>12}",
            row.gamma,
            row.margin,
            if row.passed { "yes" } else { "no" },
            row.radius_per_unit
                .map(|v| format!("{v:.4e}"))
                .unwrap_or_else(|| "-".into())
        );
    }
}

fn verify(out: &Path, scenario: &Path) -> Result<()> {
    let s = Scenario::load(scenario)?;
    let setup = s.detection_setup()?;
    let (lv, lt) = (setup.gains.voltage_vec(), setup.gains.thermal_vec());
    let gv = covering_gamma_grid(&setup.ss.a1, &setup.ss.c1, &lv)?;
    let gt = covering_gamma_grid(&setup.ss.a2, &setup.ss.c2, &lt)?;
    let v = gamma_sweep(&setup.ss.a1, &setup.ss.c1, &lv, &gv)?;
    let t = gamma_sweep(&setup.ss.a2, &setup.ss.c2, &lt, &gt)?;
    print_sweep("voltage", &v);
    print_sweep("thermal", &t);
    let passed = v.passed() && t.passed();
    write_json(
        &scenario_dir(out, &s).join("verification.json"),
        &VerificationFile {
            schema: VERIFICATION_SCHEMA.into(),
            scenario: s.name.clone(),
            voltage: v,
            thermal: t,
        },
    )?;
    if !passed {
        return Err(Error::invalid(
            "no gamma on the grid certifies both observers",
        ));
    }
    Ok(())
}

fn campaign(out: &Path, file: &Path, workers: usize) -> Result<()> {
    let c = Campaign::load(file)?;
    let summary = run_campaign(&c, workers)?;
    write_summary(&out.join(&c.name), &summary)?;
    print!("{}", summary_table(&summary));
    if summary.failed > 0 {
        return Err(Error::invalid(format!(
            "{} of {} scenarios failed",
            summary.failed,
            summary.rows.len()
        )));
    }
    Ok(())
}

fn schema_check(files: &[PathBuf]) -> Result<()> {
    let mut bad = 0;
    for f in files {
        match check_file(f) {
            Ok(kind) => println!("ok     {}: {kind}", f.display()),
            Err(e) => {
                bad += 1;
                println!("error  {}: {e}", f.display());
            }
        }
    }
    if bad > 0 {
        return Err(Error::invalid(format!(
            "{bad} artifact(s) failed validation"
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out;
    match cli.command {
        Command::Simulate { scenario, seed } => simulate(&out, &scenario, seed),
        Command::Detect {
            scenario,
            record,
            models,
            thresholds,
        } => detect(&out, &scenario, record, models, thresholds),
        Command::Calibrate {
            scenario,
            cycles,
            models,
        } => calibrate(&out, &scenario, cycles, models),
        Command::Learn {
            scenario,
            record,
            models,
            thresholds,
        } => learn(&out, &scenario, record, models, thresholds),
        Command::Identify { problem } => identify_cmd(&out, &problem),
        Command::Verify { scenario } => verify(&out, &scenario),
        Command::Campaign { file, workers } => campaign(&out, &file, workers),
        Command::SchemaCheck { files } => schema_check(&files),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

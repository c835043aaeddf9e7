//! Every shipped scenario, run twice through the command-line tool, must
//! leave byte-identical artifacts.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use crate::{fail, scenarios_dir, Check};

const DETECTION_SCENARIOS: [&str; 7] = [
    "voltage_fault_case1",
    "voltage_fault_case2",
    "voltage_fault_case3",
    "thermal_fault_310w",
    "thermal_fault_220w",
    "thermal_fault_100w",
    "no_fault",
];

fn run(out: &Path, args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_cellguard"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .map_err(fail)?;
    if !status.status.success() {
        return Err(format!(
            "cellguard {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&status.stderr)
        ));
    }
    Ok(())
}

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(fail)? {
            let path = entry.map_err(fail)?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).map_err(fail)?.display().to_string();
                files.insert(rel, std::fs::read(&path).map_err(fail)?);
            }
        }
    }
    Ok(files)
}

/// All artifacts of one full pass, with the campaign on `workers` threads.
fn pass(out: &Path, workers: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    if out.exists() {
        std::fs::remove_dir_all(out).map_err(fail)?;
    }
    let dir = scenarios_dir();
    for name in DETECTION_SCENARIOS {
        let file = dir.join(format!("{name}.json"));
        let file = file.to_str().ok_or("non-UTF-8 path")?;
        run(out, &["simulate", "--scenario", file])?;
        run(out, &["learn", "--scenario", file])?;
        run(out, &["detect", "--scenario", file])?;
    }
    let campaign = dir.join("replication_campaign.json");
    let campaign = campaign.to_str().ok_or("non-UTF-8 path")?;
    run(out, &["campaign", "--file", campaign, "--workers", workers])?;
    let problem = dir.join("identify_synthetic.json");
    run(
        out,
        &[
            "identify",
            "--problem",
            problem.to_str().ok_or("non-UTF-8 path")?,
        ],
    )?;
    snapshot(out)
}

pub fn check() -> Check {
    let tmp = tempfile::tempdir().map_err(fail)?;
    let out = tmp.path().join("out");
    let first = pass(&out, "1")?;
    let second = pass(&out, "4")?;
    if first.keys().ne(second.keys()) {
        return Err("reruns produced different file sets".into());
    }
    let differing: Vec<&String> = first
        .iter()
        .filter(|(k, v)| second.get(*k) != Some(*v))
        .map(|(k, _)| k)
        .collect();
    if !differing.is_empty() {
        return Err(format!("artifacts differ between runs: {differing:?}"));
    }
    let bytes: usize = first.values().map(Vec::len).sum();
    Ok(format!(
        "{} artifacts ({bytes} bytes) identical across two passes, campaign on 1 and 4 workers",
        first.len()
    ))
}

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bundled;
use crate::failure::Failure;
use crate::scenario::{Built, Scenario};
use crate::tasks::{self, Check, TrialOutput};

pub const SEED_ENV: &str = "RESOLVENT_LAB_SEED";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads for independent sweep points; 1 (or 0) runs sequentially.
    pub parallel_sweeps: usize,
    pub out: Option<PathBuf>,
    pub seed_override: Option<u64>,
}

impl RunOptions {
    /// Reads the seed override from the environment.
    pub fn from_env(parallel_sweeps: usize, out: Option<PathBuf>) -> Result<Self, Failure> {
        let seed_override = match std::env::var(SEED_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| Failure::Config(format!("{SEED_ENV}={v} is not a u64")))?),
            Err(_) => None,
        };
        Ok(Self { parallel_sweeps, out, seed_override })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskReport {
    pub index: usize,
    pub task: String,
    pub status: String,
    pub seconds: f64,
    pub failed_checks: Vec<String>,
    pub error: Option<String>,
    pub artifacts: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub exit_code: i32,
    pub out_dir: Option<PathBuf>,
    pub tasks: Vec<TaskReport>,
    pub failure: Option<Failure>,
}

/// A scenario text and the directory its relative paths resolve against.
pub struct Loaded {
    pub scenario: Scenario,
    pub text: String,
    pub base: PathBuf,
}

/// Accepts a path to a scenario file or the name of a bundled scenario
/// (with or without `.json`).
pub fn load(arg: &str) -> Result<Loaded, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {arg}: {e}")))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        return Ok(Loaded { scenario: Scenario::parse(&text)?, text, base });
    }
    let name = arg.strip_suffix(".json").unwrap_or(arg);
    match bundled::get(name) {
        Some(text) => Ok(Loaded { scenario: Scenario::parse(text)?, text: text.to_string(), base: PathBuf::from(".") }),
        None => Err(Failure::Config(format!("{arg}: no such file or bundled scenario (see list-scenarios)"))),
    }
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn task_seed(trial_seed: u64, task: usize) -> u64 {
    trial_seed ^ (task as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn inputs_hash(loaded: &Loaded) -> Result<String, Failure> {
    let mut h = Sha256::new();
    h.update(loaded.text.as_bytes());
    for f in loaded.scenario.problem.referenced_files(&loaded.base) {
        let bytes = fs::read(&f).map_err(|e| Failure::Config(format!("cannot read {}: {e}", f.display())))?;
        h.update(f.to_string_lossy().as_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

fn write_csv(path: &Path, table: &[(usize, &tasks::Table)]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let header = &table[0].1.header;
    let mut head = vec!["trial".to_string()];
    head.extend(header.iter().cloned());
    w.write_record(&head).map_err(|e| Failure::Config(e.to_string()))?;
    for (trial, t) in table {
        for row in &t.rows {
            let mut rec = vec![trial.to_string()];
            rec.extend(row.iter().cloned());
            w.write_record(&rec).map_err(|e| Failure::Config(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_artifacts(
    dir: &Path,
    stem: &str,
    task: &Value,
    outputs: &[TrialOutput],
    seeds: &[u64],
) -> Result<Vec<String>, Failure> {
    let mut files = Vec::new();
    let trials: Vec<Value> = outputs
        .iter()
        .enumerate()
        .map(|(k, o)| json!({ "trial": k, "seed": seeds[k], "passed": o.passed(), "metrics": o.metrics, "checks": o.checks }))
        .collect();
    let doc = json!({ "task": task, "trials": trials });
    let name = format!("{stem}.json");
    fs::write(dir.join(&name), serde_json::to_string_pretty(&doc).expect("serializable") + "\n")?;
    files.push(name);
    if let Some(first) = outputs.first() {
        for (ti, t) in first.tables.iter().enumerate() {
            let all: Vec<(usize, &tasks::Table)> =
                outputs.iter().enumerate().filter_map(|(k, o)| o.tables.get(ti).map(|t| (k, t))).collect();
            let name = format!("{stem}-{}.csv", t.name);
            write_csv(&dir.join(&name), &all)?;
            files.push(name);
        }
    }
    for (k, o) in outputs.iter().enumerate() {
        for (label, bin) in &o.binaries {
            let name = format!("{stem}-trial{k}-{label}.rlab");
            fs::write(dir.join(&name), tasks::binary_bytes(bin))?;
            files.push(name);
        }
    }
    Ok(files)
}

fn out_dir(loaded: &Loaded, opts: &RunOptions) -> PathBuf {
    if let Some(o) = &opts.out {
        return o.clone();
    }
    match &loaded.scenario.output_dir {
        Some(d) => loaded.base.join(d),
        None => PathBuf::from("out").join(&loaded.scenario.name),
    }
}

pub fn run(arg: &str, opts: &RunOptions) -> RunReport {
    let config_fail =
        |f: Failure| RunReport { exit_code: f.exit_code(), out_dir: None, tasks: Vec::new(), failure: Some(f) };
    let loaded = match load(arg) {
        Ok(l) => l,
        Err(f) => return config_fail(f),
    };
    run_loaded(&loaded, opts).unwrap_or_else(config_fail)
}

fn build_trials(loaded: &Loaded, seed: u64) -> Result<Vec<(u64, Built)>, Failure> {
    let sc = &loaded.scenario;
    (0..sc.trials)
        .map(|k| {
            let s = trial_seed(seed, k);
            sc.problem.build(s, &loaded.base).map(|b| (s, b))
        })
        .collect()
}

pub fn run_loaded(loaded: &Loaded, opts: &RunOptions) -> Result<RunReport, Failure> {
    let sc = &loaded.scenario;
    let seed = opts.seed_override.unwrap_or(sc.seed);
    for f in sc.problem.referenced_files(&loaded.base) {
        if !f.is_file() {
            return Err(Failure::Config(format!("referenced file {} does not exist", f.display())));
        }
    }
    let hash = inputs_hash(loaded)?;
    let dir = out_dir(loaded, opts);
    fs::create_dir_all(&dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
    let threads = opts.parallel_sweeps.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;

    let started = Instant::now();
    let trials = pool.install(|| build_trials(loaded, seed))?;
    let mut reports = Vec::new();
    let mut failure: Option<Failure> = None;
    let mut assertion_failed = false;
    for (idx, task) in sc.tasks.iter().enumerate() {
        let t0 = Instant::now();
        let results: Vec<Result<TrialOutput, Failure>> = pool.install(|| {
            let one = |(s, built): &(u64, Built)| {
                let mut rng = ChaCha8Rng::seed_from_u64(task_seed(*s, idx));
                tasks::run_task(task, built, &mut rng)
            };
            if threads > 1 {
                trials.par_iter().map(one).collect()
            } else {
                trials.iter().map(one).collect()
            }
        });
        let stem = format!("{:02}-{}", idx + 1, task.name());
        let task_json = serde_json::to_value(task).expect("serializable");
        let mut report = TaskReport {
            index: idx + 1,
            task: task.name().to_string(),
            status: "pass".into(),
            seconds: 0.0,
            failed_checks: Vec::new(),
            error: None,
            artifacts: Vec::new(),
        };
        match results.into_iter().collect::<Result<Vec<_>, _>>() {
            Ok(outputs) => {
                let seeds: Vec<u64> = trials.iter().map(|t| t.0).collect();
                report.artifacts = write_artifacts(&dir, &stem, &task_json, &outputs, &seeds)?;
                let mut failed: Vec<String> = outputs
                    .iter()
                    .flat_map(|o| o.checks.iter().filter(|c| !c.pass))
                    .map(|c: &Check| c.invariant.clone())
                    .collect();
                failed.sort();
                failed.dedup();
                if !failed.is_empty() {
                    report.status = "fail".into();
                    assertion_failed = true;
                }
                report.failed_checks = failed;
            }
            Err(f) => {
                report.error = Some(f.to_string());
                match f {
                    Failure::Assertion { ref invariant, .. } => {
                        report.status = "fail".into();
                        report.failed_checks = vec![invariant.clone()];
                        assertion_failed = true;
                    }
                    _ => {
                        report.status =
                            if matches!(f, Failure::Singularity(_)) { "singular" } else { "config-error" }.into();
                        report.seconds = t0.elapsed().as_secs_f64();
                        reports.push(report);
                        failure = Some(f);
                        break;
                    }
                }
            }
        }
        report.seconds = t0.elapsed().as_secs_f64();
        reports.push(report);
    }
    let exit_code = match &failure {
        Some(f) => f.exit_code(),
        None if assertion_failed => 3,
        None => 0,
    };
    let failure = failure.or_else(|| {
        reports.iter().find(|r| r.status == "fail").map(|r| {
            Failure::assertion(
                &r.failed_checks.join(","),
                r.error.clone().unwrap_or_else(|| format!("task {} ({})", r.index, r.task)),
            )
        })
    });
    let manifest = json!({
        "schema": crate::scenario::SCHEMA_VERSION,
        "scenario": sc.name,
        "seed": seed,
        "trials": sc.trials,
        "inputs_sha256": hash,
        "versions": { "resolvent-lab": env!("CARGO_PKG_VERSION"), "resolvent-lab-core": resolvent_lab::VERSION },
        "parallel_sweeps": threads,
        "timings": { "total_seconds": started.elapsed().as_secs_f64() },
        "tasks": reports,
        "exit_code": exit_code,
        "failure": failure.as_ref().map(|f| f.to_string()),
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("serializable") + "\n")?;
    Ok(RunReport { exit_code, out_dir: Some(dir), tasks: reports, failure })
}

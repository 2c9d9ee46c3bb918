//! Running experiments and reading/writing output bundles.
//!
//! Layout of a bundle directory:
//!
//! ```text
//! manifest.json
//! config.toml                 resolved config (after overrides)
//! traces/<condition>/rep-NNN.csv
//! summaries/<condition>.json  curve summary and final regrets
//! bounds/<condition>.json     bound reports and sublinearity check
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ssbo::acquisition::AcquisitionKind;
use ssbo::metrics::{aggregate, bound_report, cumulative, sublinearity_check, BoundReport, CurveSummary, Sublinearity};
use ssbo::optimizer::{run, Mode, ObservationRecord, Problem, RunTrace};

use crate::config::{Condition, ExperimentConfig};
use crate::BenchError;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.toml";
pub const TRACE_COLUMNS: [&str; 11] = [
    "replicate",
    "t",
    "round",
    "theta_index",
    "variance_label",
    "x_index",
    "x_coords_or_seq",
    "y",
    "f_true",
    "inst_regret",
    "simple_regret",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub version: String,
    pub config_sha256: String,
    pub created_unix: u64,
    pub experiment: String,
    pub replicates: usize,
    pub base_seed: u64,
    pub trace_columns: Vec<String>,
    pub conditions: Vec<ConditionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub id: String,
    pub objective: String,
    pub acquisition: AcquisitionKind,
    pub mode: Mode,
    pub batch_size: usize,
    pub total_observations: usize,
    pub traces: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRegret {
    pub mean: f64,
    pub std_error: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub objective: String,
    pub acquisition: AcquisitionKind,
    pub mode: Mode,
    pub batch_size: usize,
    pub final_simple_regret: FinalRegret,
    pub curves: CurveSummary<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionBounds {
    pub condition: String,
    /// Slope test on the replicate-mean cumulative instantaneous regret;
    /// absent for runs shorter than 20 observations.
    pub sublinearity: Option<Sublinearity<f64>>,
    pub reports: Vec<BoundReport<f64>>,
}

/// SHA-256 of the resolved config with the output directory blanked, so
/// the hash tracks content rather than location.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.output = PathBuf::new();
    Sha256::digest(c.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Worker count from `SSBO_THREADS`, if set.
pub fn thread_limit() -> Result<Option<usize>, BenchError> {
    match std::env::var("SSBO_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(BenchError::ConfigValidation(format!("SSBO_THREADS must be a positive integer, got '{v}'"))),
        },
    }
}

fn build_problems(conditions: &[Condition]) -> Result<Vec<Problem<f64>>, BenchError> {
    conditions
        .iter()
        .map(|c| c.problem.build().map_err(|e| BenchError::ConfigValidation(format!("condition {}: {e}", c.id))))
        .collect()
}

/// Runs every condition and replicate, then writes the bundle. Nothing is
/// written if any run fails.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(Manifest, Vec<ConditionSummary>), BenchError> {
    let conditions = config.conditions()?;
    let problems = build_problems(&conditions)?;
    let jobs: Vec<(usize, usize)> =
        (0..conditions.len()).flat_map(|c| (0..config.replicates).map(move |r| (c, r))).collect();
    let execute = || {
        jobs.par_iter()
            .map(|&(c, r)| {
                let cond = &conditions[c];
                run(&problems[c], &cond.replicate(r), cond.mode)
                    .map_err(|source| BenchError::RuntimeFailure { condition: cond.id.clone(), replicate: r, source })
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let traces = match thread_limit()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::ConfigValidation(format!("thread pool: {e}")))?
            .install(execute)?,
        None => execute()?,
    };

    let out = &config.output;
    create_dir(out)?;
    write_text(&out.join(CONFIG), &config.to_toml())?;
    let mut entries = Vec::with_capacity(conditions.len());
    for (c, (cond, problem)) in conditions.iter().zip(&problems).enumerate() {
        let dir = out.join("traces").join(&cond.id);
        create_dir(&dir)?;
        let mut files = Vec::with_capacity(config.replicates);
        for r in 0..config.replicates {
            let rel = format!("traces/{}/{}", cond.id, trace_file_name(r));
            write_trace(&out.join(&rel), &traces[c * config.replicates + r], problem)?;
            files.push(rel);
        }
        entries.push(ConditionEntry {
            id: cond.id.clone(),
            objective: cond.problem.objective.to_string(),
            acquisition: cond.settings.acquisition.kind,
            mode: cond.mode,
            batch_size: cond.settings.batch_size,
            total_observations: cond.settings.total_observations,
            traces: files,
        });
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: config_hash(config),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        experiment: config.name.clone(),
        replicates: config.replicates,
        base_seed: config.base_seed,
        trace_columns: TRACE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        conditions: entries,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    let summaries = report(out)?;
    Ok((manifest, summaries))
}

pub fn trace_file_name(replicate: usize) -> String {
    format!("rep-{replicate:03}.csv")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.to_path_buf(), source }
}

fn create_dir(path: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(path).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), BenchError> {
    fs::write(path, text).map_err(io_err(path))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), BenchError> {
    let mut text = serde_json::to_string_pretty(value).expect("bundle values serialize");
    text.push('\n');
    write_text(path, &text)
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> BenchError + '_ {
    move |e| BenchError::Bundle(format!("{}: {e}", path.display()))
}

pub fn write_trace(path: &Path, trace: &RunTrace<f64>, problem: &Problem<f64>) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err(path))?;
    w.write_record(TRACE_COLUMNS).map_err(csv_err(path))?;
    for o in &trace.observations {
        w.write_record([
            trace.replicate.to_string(),
            o.t.to_string(),
            o.round.to_string(),
            o.theta_index.to_string(),
            o.variance_label.to_string(),
            o.x_index.to_string(),
            problem.domain.label(o.x_index),
            o.y.to_string(),
            o.f_true.to_string(),
            o.inst_regret.to_string(),
            o.simple_regret.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a trace file back. Mode, acquisition and optimum come from the
/// caller; per-round score summaries are not stored and come back empty.
pub fn read_trace(path: &Path, cond: &ConditionEntry, problem: &Problem<f64>) -> Result<RunTrace<f64>, BenchError> {
    let mut r = csv::ReaderBuilder::new().from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
    if header != TRACE_COLUMNS {
        return Err(BenchError::Bundle(format!("{}: unexpected columns {header:?}", path.display())));
    }
    let bad = |what: &str| BenchError::Bundle(format!("{}: bad {what}", path.display()));
    let mut replicate = 0;
    let mut observations = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let int = |i: usize| rec[i].parse::<usize>().map_err(|_| bad(TRACE_COLUMNS[i]));
        let real = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(TRACE_COLUMNS[i]));
        replicate = int(0)? as u64;
        observations.push(ObservationRecord {
            t: int(1)?,
            round: int(2)?,
            theta_index: int(3)?,
            variance_label: real(4)?,
            x_index: int(5)?,
            y: real(7)?,
            f_true: real(8)?,
            inst_regret: real(9)?,
            simple_regret: real(10)?,
        });
    }
    if let Some(o) = observations.iter().find(|o| o.x_index >= problem.domain.len() || o.theta_index >= problem.family.num_thetas()) {
        return Err(BenchError::Bundle(format!("{}: index out of range at t = {}", path.display(), o.t)));
    }
    let (x_star, f_star) = problem.optimum();
    Ok(RunTrace {
        seed: 0,
        replicate,
        mode: cond.mode,
        acquisition: cond.acquisition,
        batch_size: cond.batch_size,
        x_star,
        f_star,
        observations,
        rounds: Vec::new(),
    })
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, BenchError> {
    let path = dir.join(MANIFEST);
    if !path.is_file() {
        return Err(BenchError::MissingManifest(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| BenchError::Bundle(format!("{}: {e}", path.display())))?;
    let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0);
    if found != SCHEMA_VERSION as u64 {
        return Err(BenchError::SchemaMismatch { found, expected: SCHEMA_VERSION });
    }
    serde_json::from_value(value).map_err(|e| BenchError::Bundle(format!("{}: {e}", path.display())))
}

fn final_regret(traces: &[RunTrace<f64>]) -> FinalRegret {
    let values: Vec<f64> = traces.iter().map(|t| t.final_simple_regret().unwrap_or(0.0)).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    FinalRegret { mean, std_error: (var / n).sqrt(), values }
}

/// Summaries and bound diagnostics for one condition's traces.
pub fn summarize(
    cond: &ConditionEntry,
    condition: &Condition,
    problem: &Problem<f64>,
    traces: &[RunTrace<f64>],
) -> Result<(ConditionSummary, ConditionBounds), BenchError> {
    let fail = |source| BenchError::RuntimeFailure { condition: cond.id.clone(), replicate: 0, source };
    let curves = aggregate(traces).map_err(fail)?;
    let (_, scale) = problem.standardization();
    let noise = condition.settings.noise_variance.unwrap_or_else(|| problem.default_noise_variance()) / (scale * scale);
    // The information gain needs positive noise; fall back to a tiny floor.
    let noise = noise.max(1e-12);
    let reports = traces
        .iter()
        .map(|t| bound_report(t, problem, noise, &condition.settings.acquisition.beta))
        .collect::<Result<Vec<_>, _>>()
        .map_err(fail)?;
    let sublinearity = if curves.instantaneous.mean.len() >= 20 {
        Some(sublinearity_check(&cumulative(&curves.instantaneous.mean)).map_err(fail)?)
    } else {
        None
    };
    Ok((
        ConditionSummary {
            condition: cond.id.clone(),
            objective: cond.objective.clone(),
            acquisition: cond.acquisition,
            mode: cond.mode,
            batch_size: cond.batch_size,
            final_simple_regret: final_regret(traces),
            curves,
        },
        ConditionBounds { condition: cond.id.clone(), sublinearity, reports },
    ))
}

/// Recomputes summary and bound files from the traces of a bundle.
pub fn report(dir: &Path) -> Result<Vec<ConditionSummary>, BenchError> {
    let manifest = read_manifest(dir)?;
    let config = ExperimentConfig::load(&dir.join(CONFIG))?;
    let conditions = config.conditions()?;
    let problems = build_problems(&conditions)?;
    create_dir(&dir.join("summaries"))?;
    create_dir(&dir.join("bounds"))?;
    let mut out = Vec::with_capacity(manifest.conditions.len());
    for entry in &manifest.conditions {
        let c = conditions
            .iter()
            .position(|c| c.id == entry.id)
            .ok_or_else(|| BenchError::Bundle(format!("condition {} missing from {CONFIG}", entry.id)))?;
        let traces = entry
            .traces
            .iter()
            .map(|rel| read_trace(&dir.join(rel), entry, &problems[c]))
            .collect::<Result<Vec<_>, _>>()?;
        let (summary, bounds) = summarize(entry, &conditions[c], &problems[c], &traces)?;
        write_json(&dir.join("summaries").join(format!("{}.json", entry.id)), &summary)?;
        write_json(&dir.join("bounds").join(format!("{}.json", entry.id)), &bounds)?;
        out.push(summary);
    }
    Ok(out)
}

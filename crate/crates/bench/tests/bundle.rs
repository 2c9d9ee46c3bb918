use std::fs;
use std::path::Path;
use std::process::Command;

use ssbo_bench::bundle::{config_hash, read_manifest, ConditionSummary, MANIFEST, TRACE_COLUMNS};
use ssbo_bench::{report, run_experiment, BenchError, ExperimentConfig};

fn config(out: &Path, body: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::parse(body).unwrap();
    c.output = out.to_path_buf();
    c
}

const MINIMAL: &str = r#"
name = "minimal"
replicates = 1
base_seed = 3

[[sweep]]
objectives = ["ackley"]
acquisitions = ["ss-ucb"]
total_observations = 5
"#;

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn minimal_config_writes_one_short_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, summaries) = run_experiment(&config(dir.path(), MINIMAL)).unwrap();
    assert_eq!(manifest.conditions.len(), 1);
    assert_eq!(manifest.conditions[0].traces.len(), 1);
    let rows = read_csv(&dir.path().join(&manifest.conditions[0].traces[0]));
    assert_eq!(rows[0], TRACE_COLUMNS);
    assert_eq!(rows.len(), 6);
    let text = fs::read_to_string(dir.path().join(&manifest.conditions[0].traces[0])).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    // single trace: summary equals the trace
    let s = &summaries[0];
    let simple: Vec<f64> = rows[1..].iter().map(|r| r[10].parse().unwrap()).collect();
    assert_eq!(s.curves.simple.mean, simple);
    assert_eq!(s.curves.simple.lower, simple);
    assert_eq!(s.curves.simple.upper, simple);
    assert_eq!(s.final_simple_regret.values, vec![simple[4]]);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let body = MINIMAL.replace("replicates = 1", "replicates = 3").replace("[\"ss-ucb\"]", "[\"ss-ucb\", \"random\"]");
    let (ma, _) = run_experiment(&config(a.path(), &body)).unwrap();
    let (mb, _) = run_experiment(&config(b.path(), &body)).unwrap();
    assert_eq!(ma.config_sha256, mb.config_sha256);
    for cond in &ma.conditions {
        for rel in &cond.traces {
            assert_eq!(fs::read(a.path().join(rel)).unwrap(), fs::read(b.path().join(rel)).unwrap());
        }
        for sub in ["summaries", "bounds"] {
            let file = format!("{sub}/{}.json", cond.id);
            assert_eq!(fs::read(a.path().join(&file)).unwrap(), fs::read(b.path().join(&file)).unwrap());
        }
    }
}

#[test]
fn hash_tracks_config_content() {
    let base = config(Path::new("x"), MINIMAL);
    let moved = config(Path::new("y"), MINIMAL);
    assert_eq!(config_hash(&base), config_hash(&moved));
    let changed = config(Path::new("x"), &MINIMAL.replace("total_observations = 5", "total_observations = 6"));
    assert_ne!(config_hash(&base), config_hash(&changed));
    let reseeded = config(Path::new("x"), &MINIMAL.replace("base_seed = 3", "base_seed = 4"));
    assert_ne!(config_hash(&base), config_hash(&reseeded));
}

#[test]
fn report_is_idempotent_and_matches_raw_traces() {
    let dir = tempfile::tempdir().unwrap();
    let body = MINIMAL.replace("replicates = 1", "replicates = 50").replace("total_observations = 5", "total_observations = 6");
    let (manifest, _) = run_experiment(&config(dir.path(), &body)).unwrap();
    let id = &manifest.conditions[0].id;
    let file = dir.path().join(format!("summaries/{id}.json"));
    let first = fs::read(&file).unwrap();
    report(dir.path()).unwrap();
    assert_eq!(fs::read(&file).unwrap(), first);

    let summary: ConditionSummary = serde_json::from_slice(&first).unwrap();
    let mut sums = [0.0f64; 6];
    let mut inst = [0.0f64; 6];
    for rel in &manifest.conditions[0].traces {
        for (t, row) in read_csv(&dir.path().join(rel))[1..].iter().enumerate() {
            sums[t] += row[10].parse::<f64>().unwrap();
            inst[t] += row[9].parse::<f64>().unwrap();
        }
    }
    for t in 0..6 {
        assert!((summary.curves.simple.mean[t] - sums[t] / 50.0).abs() <= 1e-12);
        assert!((summary.curves.instantaneous.mean[t] - inst[t] / 50.0).abs() <= 1e-12);
    }
}

#[test]
fn count_audit_for_a_full_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
name = "sequential-sweep"
replicates = 20

[[sweep]]
objectives = ["ackley", "michalewicz", "rastrigin", "schwefel"]
acquisitions = ["ss-ucb", "max-mean", "mean-ucb", "independent", "random"]
total_observations = 2
"#;
    let (manifest, summaries) = run_experiment(&config(dir.path(), body)).unwrap();
    let traces: usize = manifest.conditions.iter().map(|c| c.traces.len()).sum();
    assert_eq!(traces, 400);
    assert_eq!(summaries.len(), 20);
    assert_eq!(fs::read_dir(dir.path().join("summaries")).unwrap().count(), 20);
}

#[test]
fn missing_manifest_and_schema_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(report(dir.path()), Err(BenchError::MissingManifest(_))));
    run_experiment(&config(dir.path(), MINIMAL)).unwrap();
    let path = dir.path().join(MANIFEST);
    let text = fs::read_to_string(&path).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 99");
    fs::write(&path, text).unwrap();
    assert!(matches!(read_manifest(dir.path()), Err(BenchError::SchemaMismatch { found: 99, .. })));
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssbo"))
}

#[test]
fn cli_run_with_overrides_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, MINIMAL).unwrap();
    let out = dir.path().join("bundle");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--replicates", "2", "--seed", "9", "--mode", "batch", "--batch-size", "2"])
        .args(["--acquisition", "independent", "--objective", "rastrigin", "--out"])
        .arg(&out)
        .env("SSBO_THREADS", "1")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let manifest = read_manifest(&out).unwrap();
    assert_eq!(manifest.base_seed, 9);
    assert_eq!(manifest.conditions[0].id, "00-rastrigin-independent-batch-b2");
    assert_eq!(manifest.conditions[0].traces.len(), 2);
    let rows = read_csv(&out.join(&manifest.conditions[0].traces[1]));
    assert_eq!(rows[1][0], "1");
    assert_eq!(rows[3][2], "2");

    let again = bin().arg("report").arg(&out).output().unwrap();
    assert!(again.status.success());
    assert!(String::from_utf8_lossy(&again.stdout).contains("00-rastrigin-independent-batch-b2"));
}

#[test]
fn cli_failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bin().arg("report").arg(dir.path()).output().unwrap();
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("manifest"));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "name = ").unwrap();
    let parse = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!parse.status.success());

    fs::write(&cfg, MINIMAL).unwrap();
    let threads = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).env("SSBO_THREADS", "zero").output().unwrap();
    assert!(!threads.status.success());
    assert!(!dir.path().join("o").exists());

    let bad_kind = bin().args(["run", "--config"]).arg(&cfg).args(["--acquisition", "ucb"]).output().unwrap();
    assert!(!bad_kind.status.success());
}

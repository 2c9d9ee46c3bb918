//! Experiment harness: config files, replicate sweeps and output bundles.

pub mod bundle;
pub mod config;

use std::path::PathBuf;

use thiserror::Error;

pub use bundle::{report, run_experiment, Manifest};
pub use config::{ExperimentConfig, Overrides};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot parse {}: {message}", path.display())]
    ConfigParse { path: PathBuf, message: String },

    #[error("invalid config: {0}")]
    ConfigValidation(String),

    #[error("run failed for condition {condition}, replicate {replicate}: {source}")]
    RuntimeFailure {
        condition: String,
        replicate: usize,
        #[source]
        source: ssbo::SsboError,
    },

    #[error("no manifest.json in {}", .0.display())]
    MissingManifest(PathBuf),

    #[error("bundle schema version {found} is not the supported version {expected}")]
    SchemaMismatch { found: u64, expected: u32 },

    #[error("malformed bundle: {0}")]
    Bundle(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

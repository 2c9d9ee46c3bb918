//! Experiment configuration files and their expansion into run conditions.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssbo::acquisition::{AcquisitionKind, AcquisitionSpec, BetaSchedule};
use ssbo::objectives::ObjectiveSpec;
use ssbo::optimizer::{DomainSpec, FamilySpec, KernelChoice, Mode, ProblemSpec, RunSettings, DEFAULT_TOTAL_OBSERVATIONS};

use crate::BenchError;

pub const DEFAULT_REPLICATES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(rename = "sweep")]
    pub sweeps: Vec<Sweep>,
}

/// Every objective crossed with every acquisition, sharing the remaining
/// settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// Objective names as accepted by `ObjectiveSpec::from_str`.
    pub objectives: Vec<String>,
    pub acquisitions: Vec<AcquisitionKind>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_total")]
    pub total_observations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_variance: Option<f64>,
    #[serde(default)]
    pub beta: BetaSchedule<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelChoice>,
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

fn default_output() -> PathBuf {
    PathBuf::from("ssbo-out")
}

fn default_mode() -> Mode {
    Mode::Sequential
}

fn default_batch() -> usize {
    1
}

fn default_total() -> usize {
    DEFAULT_TOTAL_OBSERVATIONS
}

/// Command-line values that replace config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub batch_size: Option<usize>,
    pub acquisition: Option<AcquisitionKind>,
    pub objective: Option<String>,
}

/// One (objective, acquisition, mode) cell of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub id: String,
    pub problem: ProblemSpec,
    pub mode: Mode,
    pub settings: RunSettings<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text).map_err(|message| BenchError::ConfigParse { path: path.to_path_buf(), message })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(r) = o.replicates {
            self.replicates = r;
        }
        if let Some(s) = o.seed {
            self.base_seed = s;
        }
        if let Some(out) = &o.out {
            self.output = out.clone();
        }
        for sweep in &mut self.sweeps {
            if let Some(m) = o.mode {
                sweep.mode = m;
            }
            if let Some(b) = o.batch_size {
                sweep.batch_size = b;
            }
            if let Some(a) = o.acquisition {
                sweep.acquisitions = vec![a];
            }
            if let Some(obj) = &o.objective {
                sweep.objectives = vec![obj.clone()];
            }
        }
    }

    /// Checks every field and expands the sweeps into conditions.
    pub fn conditions(&self) -> Result<Vec<Condition>, BenchError> {
        let invalid = |m: String| BenchError::ConfigValidation(m);
        if self.replicates == 0 {
            return Err(invalid("replicates must be at least 1".into()));
        }
        if self.base_seed.checked_add(self.replicates as u64 - 1).is_none() {
            return Err(invalid("base_seed + replicates overflows u64".into()));
        }
        if self.sweeps.is_empty() {
            return Err(invalid("config has no [[sweep]] entries".into()));
        }
        let mut out = Vec::new();
        for (s, sweep) in self.sweeps.iter().enumerate() {
            if sweep.objectives.is_empty() || sweep.acquisitions.is_empty() {
                return Err(invalid(format!("sweep {s} needs at least one objective and one acquisition")));
            }
            if sweep.batch_size == 0 {
                return Err(invalid(format!("sweep {s}: batch_size must be at least 1")));
            }
            if let Some(n) = sweep.noise_variance {
                if !(n >= 0.0) {
                    return Err(invalid(format!("sweep {s}: noise_variance must be non-negative")));
                }
            }
            sweep.beta.validate().map_err(|e| invalid(format!("sweep {s}: {e}")))?;
            for name in &sweep.objectives {
                let objective: ObjectiveSpec = name.parse().map_err(|e| invalid(format!("sweep {s}: {e}")))?;
                let mut problem = ProblemSpec::default_for(objective);
                if let Some(d) = &sweep.domain {
                    problem.domain = d.clone();
                }
                if let Some(f) = &sweep.family {
                    problem.family = f.clone();
                }
                if let Some(k) = &sweep.kernel {
                    problem.kernel = k.clone();
                }
                for &kind in &sweep.acquisitions {
                    let batch = if sweep.mode == Mode::Sequential { 1 } else { sweep.batch_size };
                    let id = format!("{:02}-{}-{}-{}-b{}", out.len(), objective, kind, sweep.mode, batch);
                    out.push(Condition {
                        id,
                        problem: problem.clone(),
                        mode: sweep.mode,
                        settings: RunSettings {
                            acquisition: AcquisitionSpec { kind, beta: sweep.beta },
                            batch_size: batch,
                            total_observations: sweep.total_observations,
                            noise_variance: sweep.noise_variance,
                            seed: self.base_seed,
                            replicate: 0,
                        },
                    });
                }
            }
        }
        Ok(out)
    }
}

impl Condition {
    /// Settings of one replicate: seed `base_seed + replicate`, with the
    /// replicate also selecting the rng stream.
    pub fn replicate(&self, replicate: usize) -> RunSettings<f64> {
        RunSettings { seed: self.settings.seed + replicate as u64, replicate: replicate as u64, ..self.settings.clone() }
    }
}

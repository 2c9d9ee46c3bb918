//! Sequential and batch optimization loops over sampling distributions.
//!
//! Each round scores every distribution, picks one, draws from it, observes
//! the noisy objective and updates the GP. Sequential runs draw one point per
//! round; batch runs draw up to `B` points from the same distribution and
//! update once.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    beta_at, check_family, score_thetas_from_posterior, select_theta, theta_mean_points, ucb_from_posterior,
    AcquisitionKind, AcquisitionSpec,
};
use crate::dist::{
    build_grid_family_scaled, build_mutagenesis_family, SamplingFamily, TableFamily, DEFAULT_MEANS_PER_DIM,
    DEFAULT_MUTATION_RATES, DEFAULT_STD_FRACTIONS,
};
use crate::domain::{GridDomain, SearchDomain, SequenceDomain};
use crate::error::{Result, SsboError};
use crate::gp::{mean_gradient_max, GpModel, KernelSpec, PosteriorCache};
use crate::objectives::ObjectiveSpec;
use crate::penalty::{batch_scores, independent_scores, max_or_zero, PenaltyState};
use crate::scalar::Scalar;

pub const DEFAULT_TOTAL_OBSERVATIONS: usize = 200;
pub const DEFAULT_GRID_CELLS: usize = 64;
pub const DEFAULT_SEQUENCE_LENGTH: usize = 5;
/// Default observation noise as a fraction of the squared objective range.
pub const DEFAULT_NOISE_FRACTION: f64 = 1e-4;
/// Default squared-exponential lengthscale as a fraction of the domain side.
pub const DEFAULT_LENGTHSCALE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainSpec {
    /// Cell-centred grid over the objective's box.
    Grid { dim: usize, cells_per_dim: usize },
    Sequence { length: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilySpec {
    /// Discretized normals; stds are fractions of the domain side.
    Normal { means_per_dim: usize, std_fractions: Vec<f64> },
    Mutagenesis { rates: Vec<f64> },
    /// One point mass per domain point.
    PointMass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelChoice {
    /// Lengthscale as a fraction of the domain side.
    SquaredExponential { lengthscale_fraction: f64, signal_variance: f64 },
    LinearOneHot { signal_variance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub objective: ObjectiveSpec,
    pub domain: DomainSpec,
    pub family: FamilySpec,
    pub kernel: KernelChoice,
}

impl ProblemSpec {
    /// 64x64 grid with normal families for box objectives; length-5
    /// sequences with mutagenesis families for sequence oracles.
    pub fn default_for(objective: ObjectiveSpec) -> Self {
        if objective.is_sequence() {
            Self {
                objective,
                domain: DomainSpec::Sequence { length: DEFAULT_SEQUENCE_LENGTH },
                family: FamilySpec::Mutagenesis { rates: DEFAULT_MUTATION_RATES.to_vec() },
                kernel: KernelChoice::LinearOneHot { signal_variance: 1.0 },
            }
        } else {
            Self {
                objective,
                domain: DomainSpec::Grid { dim: 2, cells_per_dim: DEFAULT_GRID_CELLS },
                family: FamilySpec::Normal {
                    means_per_dim: DEFAULT_MEANS_PER_DIM,
                    std_fractions: DEFAULT_STD_FRACTIONS.to_vec(),
                },
                kernel: KernelChoice::SquaredExponential {
                    lengthscale_fraction: DEFAULT_LENGTHSCALE_FRACTION,
                    signal_variance: 1.0,
                },
            }
        }
    }

    pub fn build<T: Scalar>(&self) -> Result<Problem<T>> {
        let mismatch = || SsboError::InvalidParameter(format!("objective {} does not fit the domain", self.objective));
        let (domain, family, side): (Arc<dyn SearchDomain<T>>, Arc<dyn SamplingFamily<T>>, T) = match &self.domain {
            DomainSpec::Grid { dim, cells_per_dim } => {
                let (lo, hi) = self.objective.range().ok_or_else(mismatch)?;
                let grid = GridDomain::cube(*dim, T::lit(lo), T::lit(hi), *cells_per_dim)?;
                let family: Arc<dyn SamplingFamily<T>> = match &self.family {
                    FamilySpec::Normal { means_per_dim, std_fractions } => {
                        let fr: Vec<T> = std_fractions.iter().map(|&f| T::lit(f)).collect();
                        Arc::new(build_grid_family_scaled(&grid, *means_per_dim, &fr)?)
                    }
                    FamilySpec::PointMass => Arc::new(TableFamily::point_masses(grid.len())),
                    FamilySpec::Mutagenesis { .. } => {
                        return Err(SsboError::InvalidParameter("mutagenesis family needs a sequence domain".into()))
                    }
                };
                (Arc::new(grid), family, T::lit(hi - lo))
            }
            DomainSpec::Sequence { length } => {
                if !self.objective.is_sequence() {
                    return Err(mismatch());
                }
                let seqs = SequenceDomain::new(*length)?;
                let family: Arc<dyn SamplingFamily<T>> = match &self.family {
                    FamilySpec::Mutagenesis { rates } => {
                        let r: Vec<T> = rates.iter().map(|&v| T::lit(v)).collect();
                        Arc::new(build_mutagenesis_family(&seqs, &r)?)
                    }
                    FamilySpec::PointMass => Arc::new(TableFamily::point_masses(seqs.len())),
                    FamilySpec::Normal { .. } => {
                        return Err(SsboError::InvalidParameter("normal family needs a grid domain".into()))
                    }
                };
                (Arc::new(seqs), family, T::one())
            }
        };
        let kernel = match (&self.kernel, &self.domain) {
            (KernelChoice::SquaredExponential { lengthscale_fraction, signal_variance }, _) => {
                KernelSpec::squared_exponential(domain.feature_dim(), T::lit(*lengthscale_fraction) * side, T::lit(*signal_variance))?
            }
            (KernelChoice::LinearOneHot { signal_variance }, DomainSpec::Sequence { length }) => {
                KernelSpec::linear_one_hot(domain.feature_dim(), *length, T::lit(*signal_variance))?
            }
            (KernelChoice::LinearOneHot { .. }, DomainSpec::Grid { .. }) => {
                return Err(SsboError::InvalidParameter("one-hot kernel needs a sequence domain".into()))
            }
        };
        let length = match self.domain {
            DomainSpec::Sequence { length } => length,
            DomainSpec::Grid { .. } => 0,
        };
        let objective = self.objective.build(length);
        let truth = objective.evaluate_domain(domain.as_ref())?;
        Problem::new(domain, family, kernel, truth)
    }
}

/// A fully materialized problem shared by every run on it.
#[derive(Debug, Clone)]
pub struct Problem<T: Scalar> {
    pub domain: Arc<dyn SearchDomain<T>>,
    pub family: Arc<dyn SamplingFamily<T>>,
    pub kernel: KernelSpec<T>,
    /// Noiseless objective at every domain point.
    pub truth: Vec<T>,
    x_star: usize,
    f_star: T,
    truth_mean: T,
    truth_std: T,
    truth_range: T,
    mean_points: Arc<std::sync::OnceLock<Vec<usize>>>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(domain: Arc<dyn SearchDomain<T>>, family: Arc<dyn SamplingFamily<T>>, kernel: KernelSpec<T>, truth: Vec<T>) -> Result<Self> {
        check_family(family.as_ref(), domain.as_ref())?;
        if truth.len() != domain.len() {
            return Err(SsboError::LengthMismatch { expected: domain.len(), actual: truth.len() });
        }
        if kernel.input_dim != domain.feature_dim() {
            return Err(SsboError::DimensionMismatch { expected: domain.feature_dim(), actual: kernel.input_dim });
        }
        if truth.is_empty() {
            return Err(SsboError::InvalidParameter("empty domain".into()));
        }
        let (x_star, f_star) = truth.iter().enumerate().fold((0, truth[0]), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        let n = T::from_usize_lossy(truth.len());
        let truth_mean = truth.iter().copied().sum::<T>() / n;
        let sd = (truth.iter().map(|&v| (v - truth_mean) * (v - truth_mean)).sum::<T>() / n).sqrt();
        let truth_std = if sd > T::zero() { sd } else { T::one() };
        let min = truth.iter().copied().fold(T::infinity(), T::min);
        Ok(Self {
            domain,
            family,
            kernel,
            x_star,
            f_star,
            truth_mean,
            truth_std,
            truth_range: f_star - min,
            truth,
            mean_points: Arc::new(std::sync::OnceLock::new()),
        })
    }

    /// Maximizer index and value of the noiseless objective (lowest index on ties).
    pub fn optimum(&self) -> (usize, T) {
        (self.x_star, self.f_star)
    }

    /// Mean and standard deviation used to standardize observations.
    pub fn standardization(&self) -> (T, T) {
        (self.truth_mean, self.truth_std)
    }

    pub fn default_noise_variance(&self) -> T {
        T::lit(DEFAULT_NOISE_FRACTION) * self.truth_range * self.truth_range
    }

    fn mean_points(&self) -> Result<&[usize]> {
        if let Some(p) = self.mean_points.get() {
            return Ok(p);
        }
        let computed = theta_mean_points(self.family.as_ref(), self.domain.as_ref())?;
        Ok(self.mean_points.get_or_init(|| computed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sequential,
    Batch,
}

impl std::str::FromStr for Mode {
    type Err = SsboError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Mode::Sequential),
            "batch" => Ok(Mode::Batch),
            _ => Err(SsboError::InvalidParameter(format!("unknown mode '{s}'"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Sequential => "sequential",
            Mode::Batch => "batch",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings<T> {
    pub acquisition: AcquisitionSpec<T>,
    pub batch_size: usize,
    pub total_observations: usize,
    /// Observation noise variance in objective units; defaults to a small
    /// fraction of the squared objective range.
    pub noise_variance: Option<T>,
    pub seed: u64,
    pub replicate: u64,
}

impl<T: Scalar> RunSettings<T> {
    pub fn new(kind: AcquisitionKind, batch_size: usize, seed: u64, replicate: u64) -> Self {
        Self {
            acquisition: AcquisitionSpec::new(kind),
            batch_size,
            total_observations: DEFAULT_TOTAL_OBSERVATIONS,
            noise_variance: None,
            seed,
            replicate,
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub settings: RunSettings<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord<T> {
    /// 1-based observation count.
    pub t: usize,
    /// 1-based round.
    pub round: usize,
    pub theta_index: usize,
    pub variance_label: T,
    pub x_index: usize,
    pub y: T,
    pub f_true: T,
    pub inst_regret: T,
    pub simple_regret: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord<T> {
    pub round: usize,
    pub batch_size: usize,
    pub theta_index: usize,
    pub variance_label: T,
    pub beta: T,
    pub score_max: T,
    pub score_mean: T,
    pub score_min: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace<T> {
    pub seed: u64,
    pub replicate: u64,
    pub mode: Mode,
    pub acquisition: AcquisitionKind,
    pub batch_size: usize,
    pub x_star: usize,
    pub f_star: T,
    pub observations: Vec<ObservationRecord<T>>,
    pub rounds: Vec<RoundRecord<T>>,
}

impl<T: Scalar> RunTrace<T> {
    pub fn simple_regret(&self) -> Vec<T> {
        self.observations.iter().map(|o| o.simple_regret).collect()
    }

    pub fn instantaneous_regret(&self) -> Vec<T> {
        self.observations.iter().map(|o| o.inst_regret).collect()
    }

    pub fn final_simple_regret(&self) -> Option<T> {
        self.observations.last().map(|o| o.simple_regret)
    }

    pub fn x_indices(&self) -> Vec<usize> {
        self.observations.iter().map(|o| o.x_index).collect()
    }
}

/// Fills regret columns from the noiseless objective values.
pub fn compute_regrets<T: Scalar>(trace: &mut RunTrace<T>, x_star: usize, f_star: T) {
    trace.x_star = x_star;
    trace.f_star = f_star;
    let mut best = T::infinity();
    for o in &mut trace.observations {
        o.inst_regret = f_star - o.f_true;
        best = best.min(o.inst_regret);
        o.simple_regret = best;
    }
}

/// One observation per round.
pub fn run_sequential<T: Scalar>(problem: &Problem<T>, settings: &RunSettings<T>) -> Result<RunTrace<T>> {
    run(problem, settings, Mode::Sequential)
}

/// Up to `batch_size` draws per round from a single distribution; the last
/// round is shorter when the budget is not a multiple of the batch size.
pub fn run_batch<T: Scalar>(problem: &Problem<T>, settings: &RunSettings<T>) -> Result<RunTrace<T>> {
    run(problem, settings, Mode::Batch)
}

/// Builds the problem from its spec and runs it.
pub fn run_config(config: &RunConfig, mode: Mode) -> Result<RunTrace<f64>> {
    run(&config.problem.build()?, &config.settings, mode)
}

pub fn run<T: Scalar>(problem: &Problem<T>, settings: &RunSettings<T>, mode: Mode) -> Result<RunTrace<T>> {
    settings.acquisition.beta.validate()?;
    if settings.batch_size == 0 {
        return Err(SsboError::InvalidParameter("batch size must be at least 1".into()));
    }
    let domain = problem.domain.as_ref();
    let family = problem.family.as_ref();
    let kind = settings.acquisition.kind;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    rng.set_stream(settings.replicate);

    let (center, scale) = problem.standardization();
    let noise = settings.noise_variance.unwrap_or_else(|| problem.default_noise_variance());
    if !(noise >= T::zero()) {
        return Err(SsboError::InvalidParameter(format!("noise variance must be non-negative, got {noise}")));
    }
    let noise_sd = noise.sqrt();
    let mut model = GpModel::fit(problem.kernel.clone(), noise / (scale * scale), Vec::new(), Vec::new())?;
    let mut cache = PosteriorCache::new(&model, domain.points())?;
    let mean_points = match kind {
        AcquisitionKind::MeanUcb => Some(problem.mean_points()?),
        _ => None,
    };
    let (x_star, f_star) = problem.optimum();

    let mut trace = RunTrace {
        seed: settings.seed,
        replicate: settings.replicate,
        mode,
        acquisition: kind,
        batch_size: if mode == Mode::Sequential { 1 } else { settings.batch_size },
        x_star,
        f_star,
        observations: Vec::with_capacity(settings.total_observations),
        rounds: Vec::new(),
    };
    let mut best_regret = T::infinity();
    let mut done = 0;
    while done < settings.total_observations {
        let b = match mode {
            Mode::Sequential => 1,
            Mode::Batch => settings.batch_size.min(settings.total_observations - done),
        };
        let t = done + 1;
        let beta = beta_at(&settings.acquisition.beta, t, domain.len());
        let posterior = cache.posterior()?;
        let scores = match (kind, b) {
            (AcquisitionKind::SsUcb, 2..) => {
                let alpha = ucb_from_posterior(&posterior, beta);
                let state = PenaltyState::new(mean_gradient_max(&model, domain.points()), max_or_zero(model.targets()), posterior);
                batch_scores(&state, domain, family, &alpha, b)?
            }
            (AcquisitionKind::Independent, 2..) => independent_scores(family, &ucb_from_posterior(&posterior, beta), b)?,
            _ => score_thetas_from_posterior(kind, &posterior, beta, family, mean_points)?,
        };
        let choice = select_theta(&scores, kind, family, &mut rng);
        let round = trace.rounds.len() + 1;
        let n = T::from_usize_lossy(scores.len());
        trace.rounds.push(RoundRecord {
            round,
            batch_size: b,
            theta_index: choice.theta_index,
            variance_label: choice.variance_label,
            beta,
            score_max: scores.iter().copied().fold(T::neg_infinity(), T::max),
            score_mean: scores.iter().copied().sum::<T>() / n,
            score_min: scores.iter().copied().fold(T::infinity(), T::min),
        });

        let mut xs = Vec::with_capacity(b);
        let mut ys = Vec::with_capacity(b);
        for _ in 0..b {
            let x = family.sample(choice.theta_index, &mut rng);
            let eps: f64 = StandardNormal.sample(&mut rng);
            let f_true = problem.truth[x];
            let y = f_true + noise_sd * T::lit(eps);
            let inst = f_star - f_true;
            best_regret = best_regret.min(inst);
            done += 1;
            trace.observations.push(ObservationRecord {
                t: done,
                round,
                theta_index: choice.theta_index,
                variance_label: choice.variance_label,
                x_index: x,
                y,
                f_true,
                inst_regret: inst,
                simple_regret: best_regret,
            });
            xs.push(domain.points()[x].clone());
            ys.push((y - center) / scale);
        }
        model = model.with_observations(&xs, &ys)?;
        cache.sync(&model);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests;

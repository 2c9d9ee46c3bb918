//! Upper-confidence-bound acquisition and the rules that score sampling
//! distributions by it.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::dist::{SamplingFamily, ThetaChoice};
use crate::domain::SearchDomain;
use crate::error::{Result, SsboError};
use crate::gp::{GpModel, Posterior};
use crate::scalar::Scalar;

/// Relative tolerance under which two theta scores count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_DELTA: f64 = 0.1;

/// Exploration weight `beta_t` as a function of the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BetaSchedule<T> {
    /// `2 ln(|D| t^2 pi^2 / (6 delta))`.
    TheoremDiscrete { delta: T },
    Constant { value: T },
}

impl<T: Scalar> Default for BetaSchedule<T> {
    fn default() -> Self {
        BetaSchedule::TheoremDiscrete { delta: T::lit(DEFAULT_DELTA) }
    }
}

impl<T: Scalar> BetaSchedule<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BetaSchedule::TheoremDiscrete { delta } if !(delta > T::zero() && delta < T::one()) => {
                Err(SsboError::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")))
            }
            BetaSchedule::Constant { value } if !(value > T::zero()) || !value.is_finite() => {
                Err(SsboError::InvalidParameter(format!("constant beta must be positive, got {value}")))
            }
            _ => Ok(()),
        }
    }
}

/// `beta_t` for iteration `t >= 1` on a domain of `domain_size` points.
pub fn beta_at<T: Scalar>(schedule: &BetaSchedule<T>, t: usize, domain_size: usize) -> T {
    match *schedule {
        BetaSchedule::TheoremDiscrete { delta } => {
            let t = T::from_usize_lossy(t.max(1));
            let pi2 = T::PI() * T::PI();
            T::lit(2.0) * (T::from_usize_lossy(domain_size) * t * t * pi2 / (T::lit(6.0) * delta)).ln()
        }
        BetaSchedule::Constant { value } => value,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcquisitionKind {
    /// Expected UCB under each distribution; penalized in batch mode.
    SsUcb,
    /// Expected posterior mean.
    MaxMean,
    /// UCB at the domain point nearest the distribution's mean.
    MeanUcb,
    /// Expected UCB without the batch penalty.
    Independent,
    /// Uniformly random distribution each round.
    Random,
}

impl AcquisitionKind {
    pub const ALL: [AcquisitionKind; 5] =
        [AcquisitionKind::SsUcb, AcquisitionKind::MaxMean, AcquisitionKind::MeanUcb, AcquisitionKind::Independent, AcquisitionKind::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            AcquisitionKind::SsUcb => "ss-ucb",
            AcquisitionKind::MaxMean => "max-mean",
            AcquisitionKind::MeanUcb => "mean-ucb",
            AcquisitionKind::Independent => "independent",
            AcquisitionKind::Random => "random",
        }
    }
}

impl fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AcquisitionKind {
    type Err = SsboError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| SsboError::InvalidParameter(format!("unknown acquisition kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec<T> {
    pub kind: AcquisitionKind,
    pub beta: BetaSchedule<T>,
}

impl<T: Scalar> AcquisitionSpec<T> {
    pub fn new(kind: AcquisitionKind) -> Self {
        Self { kind, beta: BetaSchedule::default() }
    }
}

/// `mean + sqrt(beta) * sd` elementwise.
pub fn ucb_from_posterior<T: Scalar>(posterior: &Posterior<T>, beta: T) -> Vec<T> {
    let root = beta.sqrt();
    posterior.mean.iter().zip(&posterior.variance).map(|(&m, &v)| m + root * v.sqrt()).collect()
}

pub fn ucb_values<T: Scalar>(model: &GpModel<T>, domain: &dyn SearchDomain<T>, beta: T) -> Result<Vec<T>> {
    Ok(ucb_from_posterior(&Posterior::from_model(model, domain.points())?, beta))
}

pub fn check_family<T: Scalar>(family: &dyn SamplingFamily<T>, domain: &dyn SearchDomain<T>) -> Result<()> {
    if family.domain_size() != domain.len() {
        return Err(SsboError::DomainMismatch { family: family.domain_size(), domain: domain.len() });
    }
    Ok(())
}

/// For every theta, the domain point nearest the distribution's feature mean.
pub fn theta_mean_points<T: Scalar>(family: &dyn SamplingFamily<T>, domain: &dyn SearchDomain<T>) -> Result<Vec<usize>> {
    check_family(family, domain)?;
    let dim = domain.feature_dim();
    let per_feature = (0..dim)
        .map(|d| {
            let column: Vec<T> = domain.points().iter().map(|p| p[d]).collect();
            family.expect_all(&column)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..family.num_thetas())
        .map(|theta| {
            let mean: Vec<T> = per_feature.iter().map(|col| col[theta]).collect();
            domain.nearest(&mean)
        })
        .collect())
}

/// Per-theta scores from a posterior already evaluated on the domain.
/// `mean_points` is required for [`AcquisitionKind::MeanUcb`].
pub fn score_thetas_from_posterior<T: Scalar>(
    kind: AcquisitionKind,
    posterior: &Posterior<T>,
    beta: T,
    family: &dyn SamplingFamily<T>,
    mean_points: Option<&[usize]>,
) -> Result<Vec<T>> {
    match kind {
        AcquisitionKind::SsUcb | AcquisitionKind::Independent => family.expect_all(&ucb_from_posterior(posterior, beta)),
        AcquisitionKind::MaxMean => family.expect_all(&posterior.mean),
        AcquisitionKind::MeanUcb => {
            let points = mean_points
                .ok_or_else(|| SsboError::InvalidParameter("mean-ucb needs per-theta mean points".into()))?;
            if points.len() != family.num_thetas() {
                return Err(SsboError::LengthMismatch { expected: family.num_thetas(), actual: points.len() });
            }
            let alpha = ucb_from_posterior(posterior, beta);
            Ok(points.iter().map(|&x| alpha[x]).collect())
        }
        AcquisitionKind::Random => Ok(vec![T::zero(); family.num_thetas()]),
    }
}

/// Scores every theta at iteration `t`.
pub fn score_thetas<T: Scalar>(
    spec: &AcquisitionSpec<T>,
    model: &GpModel<T>,
    domain: &dyn SearchDomain<T>,
    family: &dyn SamplingFamily<T>,
    t: usize,
) -> Result<Vec<T>> {
    check_family(family, domain)?;
    let posterior = Posterior::from_model(model, domain.points())?;
    let beta = beta_at(&spec.beta, t, domain.len());
    let mean_points = match spec.kind {
        AcquisitionKind::MeanUcb => Some(theta_mean_points(family, domain)?),
        _ => None,
    };
    score_thetas_from_posterior(spec.kind, &posterior, beta, family, mean_points.as_deref())
}

/// Lowest index whose score is within [`TIE_TOLERANCE`] of the maximum.
pub fn argmax_with_ties<T: Scalar>(scores: &[T]) -> usize {
    let best = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let slack = T::lit(TIE_TOLERANCE) * best.abs().max(T::one());
    scores.iter().position(|&s| s >= best - slack).unwrap_or(0)
}

/// Argmax of `scores` or, for [`AcquisitionKind::Random`], a uniform draw.
pub fn select_theta<T: Scalar>(
    scores: &[T],
    kind: AcquisitionKind,
    family: &dyn SamplingFamily<T>,
    rng: &mut dyn RngCore,
) -> ThetaChoice<T> {
    let theta_index = match kind {
        AcquisitionKind::Random => rng.gen_range(0..family.num_thetas()),
        _ => argmax_with_ties(scores),
    };
    ThetaChoice { theta_index, variance_label: family.variance_label(theta_index) }
}

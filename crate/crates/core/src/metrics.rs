//! Regret aggregation across replicates and regret-bound diagnostics.

use serde::{Deserialize, Serialize};

use crate::acquisition::{beta_at, BetaSchedule};
use crate::error::{Result, SsboError};
use crate::gp::empirical_info_gain;
use crate::optimizer::{Problem, RunTrace};
use crate::scalar::Scalar;

/// Pointwise mean with a 2.5/97.5 percentile band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band<T> {
    pub mean: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary<T> {
    pub replicates: usize,
    pub instantaneous: Band<T>,
    pub simple: Band<T>,
    /// Mean variance label of the distribution behind observation `t`.
    pub variance_label: Vec<T>,
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile<T: Scalar>(sorted: &[T], q: T) -> T {
    debug_assert!(!sorted.is_empty());
    let pos = q * T::from_usize_lossy(sorted.len() - 1);
    let lo = pos.floor().to_f64_lossy() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - T::from_usize_lossy(lo);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Mean and percentile band of equally long series. The band is widened to
/// contain the mean where skew pushes the mean outside it.
pub fn band<T: Scalar>(series: &[Vec<T>]) -> Result<Band<T>> {
    let len = series.first().map_or(0, Vec::len);
    if let Some(bad) = series.iter().find(|s| s.len() != len) {
        return Err(SsboError::LengthMismatch { expected: len, actual: bad.len() });
    }
    let n = T::from_usize_lossy(series.len());
    let mut out = Band { mean: Vec::with_capacity(len), lower: Vec::with_capacity(len), upper: Vec::with_capacity(len) };
    let mut column = Vec::with_capacity(series.len());
    for t in 0..len {
        column.clear();
        column.extend(series.iter().map(|s| s[t]));
        let mean = column.iter().copied().sum::<T>() / n;
        column.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        out.lower.push(percentile(&column, T::lit(0.025)).min(mean));
        out.upper.push(percentile(&column, T::lit(0.975)).max(mean));
        out.mean.push(mean);
    }
    Ok(out)
}

pub fn aggregate<T: Scalar>(traces: &[RunTrace<T>]) -> Result<CurveSummary<T>> {
    let inst: Vec<Vec<T>> = traces.iter().map(|t| t.instantaneous_regret()).collect();
    let simple: Vec<Vec<T>> = traces.iter().map(|t| t.simple_regret()).collect();
    let labels: Vec<Vec<T>> = traces.iter().map(|t| t.observations.iter().map(|o| o.variance_label).collect()).collect();
    Ok(CurveSummary {
        replicates: traces.len(),
        instantaneous: band(&inst)?,
        simple: band(&simple)?,
        variance_label: band(&labels)?.mean,
    })
}

/// Running sum.
pub fn cumulative<T: Scalar>(values: &[T]) -> Vec<T> {
    values
        .iter()
        .scan(T::zero(), |acc, &v| {
            *acc = *acc + v;
            Some(*acc)
        })
        .collect()
}

/// Components of the discrete regret bound for one run. The information
/// gain is that of the points actually sampled, which under-estimates the
/// maximal information gain, so `bound` is a diagnostic rather than a
/// guaranteed upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport<T> {
    pub t: usize,
    pub beta_t: T,
    pub c1: T,
    pub pi_star: T,
    pub domain_size: usize,
    pub info_gain: T,
    pub bound: T,
    /// Sum over observations of `f* - E[f]` under the chosen distribution,
    /// in the GP's standardized units.
    pub cumulative_regret: T,
    /// The same sum in objective units.
    pub cumulative_regret_raw: T,
}

pub fn c1<T: Scalar>(noise_variance: T) -> T {
    T::lit(8.0) / (T::one() + T::one() / noise_variance).ln()
}

/// `noise_variance` is the GP noise in standardized units.
pub fn bound_report<T: Scalar>(
    trace: &RunTrace<T>,
    problem: &Problem<T>,
    noise_variance: T,
    beta: &BetaSchedule<T>,
) -> Result<BoundReport<T>> {
    let domain = problem.domain.as_ref();
    let family = problem.family.as_ref();
    let t = trace.observations.len();
    let beta_t = beta_at(beta, t, domain.len());
    let c1 = c1(noise_variance);
    let pi_star = family.pi_star();
    let points: Vec<Vec<T>> = trace.observations.iter().map(|o| domain.points()[o.x_index].clone()).collect();
    let info_gain = empirical_info_gain(&problem.kernel, noise_variance, &points)?;
    let expected = family.expect_all(&problem.truth)?;
    let (_, f_star) = problem.optimum();
    let raw: T = trace.observations.iter().map(|o| f_star - expected[o.theta_index]).sum();
    let (_, scale) = problem.standardization();
    let bound = (T::from_usize_lossy(t) * c1 * beta_t * info_gain * T::from_usize_lossy(domain.len()) * pi_star).sqrt();
    Ok(BoundReport {
        t,
        beta_t,
        c1,
        pi_star,
        domain_size: domain.len(),
        info_gain,
        bound,
        cumulative_regret: raw / scale,
        cumulative_regret_raw: raw,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sublinearity<T> {
    pub slope: T,
    pub sublinear: bool,
}

/// Least-squares slope of `ln R_t` against `ln t` over `t` in `[T/4, T]`
/// (1-based). Leading zeros of a non-decreasing series are skipped; an
/// all-zero window counts as slope 0.
pub fn sublinearity_check<T: Scalar>(cumulative: &[T]) -> Result<Sublinearity<T>> {
    let total = cumulative.len();
    if total < 20 {
        return Err(SsboError::InvalidParameter(format!("need at least 20 points, got {total}")));
    }
    let (xs, ys): (Vec<T>, Vec<T>) = ((total / 4).max(1)..=total)
        .filter(|&t| cumulative[t - 1] > T::zero())
        .map(|t| (T::from_usize_lossy(t).ln(), cumulative[t - 1].ln()))
        .unzip();
    let slope = if xs.len() < 2 { T::zero() } else { ls_slope(&xs, &ys) };
    Ok(Sublinearity { slope, sublinear: slope < T::one() })
}

fn ls_slope<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    let n = T::from_usize_lossy(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let sxy: T = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let sxx: T = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

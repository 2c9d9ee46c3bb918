//! Local penalization for stochastic batches.
//!
//! `phi(x_i; x_j) = 1/2 erfc(-(L |x_i - x_j| - M + mu(x_i)) / sqrt(2 var(x_i)))`
//! discounts the acquisition at `x_i` given a pending draw at `x_j`. Under a
//! sampling distribution the `k - 1` earlier draws of a batch are iid, so the
//! expected discount is `phi_pi(x_i)^(k-1)` with `phi_pi = E_pi[phi(x_i; .)]`.

use crate::dist::{SamplingFamily, SparseRow};
use crate::domain::{euclidean, SearchDomain};
use crate::error::{Result, SsboError};
use crate::gp::{mean_gradient_max, GpModel, Posterior};
use crate::scalar::Scalar;

/// Standardized arguments at or above this give a penalty of exactly one.
pub const SATURATION: f64 = 6.0;

/// Penalty for a point with posterior `mean` and `variance` at distance `dist`.
#[inline]
pub fn penalty_value<T: Scalar>(l_hat: T, m_hat: T, mean: T, variance: T, dist: T) -> T {
    let arg = l_hat * dist - m_hat + mean;
    if variance <= T::zero() {
        return if arg > T::zero() { T::one() } else { T::zero() };
    }
    let z = arg / (T::lit(2.0) * variance).sqrt();
    if z >= T::lit(SATURATION) {
        return T::one();
    }
    T::lit(0.5) * (-z).erfc()
}

/// `phi(xi; xj)` under the current model.
pub fn local_penalty<T: Scalar>(model: &GpModel<T>, l_hat: T, m_hat: T, xi: &[T], xj: &[T]) -> Result<T> {
    let (mean, variance) = model.predict(xi)?;
    Ok(penalty_value(l_hat, m_hat, mean, variance, euclidean(xi, xj)))
}

/// Lipschitz and maximum estimates plus the posterior on the domain; pairwise
/// penalties are produced row by row on demand.
#[derive(Debug, Clone)]
pub struct PenaltyState<T> {
    pub l_hat: T,
    pub m_hat: T,
    pub posterior: Posterior<T>,
}

impl<T: Scalar> PenaltyState<T> {
    pub fn new(l_hat: T, m_hat: T, posterior: Posterior<T>) -> Self {
        Self { l_hat, m_hat, posterior }
    }

    pub fn phi(&self, domain: &dyn SearchDomain<T>, i: usize, j: usize) -> T {
        let p = &self.posterior;
        penalty_value(self.l_hat, self.m_hat, p.mean[i], p.variance[i], domain.distance(i, j))
    }

    /// Row `phi(x_i; .)` as offsets from one; saturated entries are omitted.
    pub fn fill_row(&self, domain: &dyn SearchDomain<T>, i: usize, out: &mut SparseRow<T>) {
        RowBuilder::new(self, domain).fill(i, out);
    }

    /// Dense `|D| x |D|` matrix, row `i` holding `phi(x_i; .)`.
    pub fn pairwise_matrix(&self, domain: &dyn SearchDomain<T>) -> Vec<T> {
        let n = domain.len();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            out.extend((0..n).map(|j| self.phi(domain, i, j)));
        }
        out
    }
}

/// Produces penalty rows. Only points inside the saturation radius are
/// evaluated, and each distinct distance once per row.
pub struct RowBuilder<'a, T> {
    state: &'a PenaltyState<T>,
    domain: &'a dyn SearchDomain<T>,
    candidates: Vec<usize>,
    values: Vec<T>,
    stamps: Vec<usize>,
    row: usize,
}

impl<'a, T: Scalar> RowBuilder<'a, T> {
    pub fn new(state: &'a PenaltyState<T>, domain: &'a dyn SearchDomain<T>) -> Self {
        let k = domain.num_distance_classes();
        Self { state, domain, candidates: Vec::new(), values: vec![T::zero(); k], stamps: vec![0; k], row: 0 }
    }

    pub fn fill(&mut self, i: usize, out: &mut SparseRow<T>) {
        self.row += 1;
        out.clear(T::one());
        let s = self.state;
        let (mean, variance) = (s.posterior.mean[i], s.posterior.variance[i]);
        if s.l_hat == T::zero() {
            // distance plays no role: the row is constant
            out.clear(penalty_value(s.l_hat, s.m_hat, mean, variance, T::zero()));
            return;
        }
        {
            // beyond this distance the standardized argument exceeds the saturation level
            let radius = (T::lit(SATURATION) * (T::lit(2.0) * variance.max(T::zero())).sqrt() + s.m_hat - mean) / s.l_hat;
            let slack = T::lit(1e-9) * (radius.abs() + T::one());
            self.domain.neighbors_within(i, radius + slack, &mut self.candidates);
        }
        for &j in &self.candidates {
            let c = self.domain.distance_class(i, j);
            if self.stamps[c] != self.row {
                self.stamps[c] = self.row;
                self.values[c] = penalty_value(s.l_hat, s.m_hat, mean, variance, self.domain.distance(i, j));
            }
            let v = self.values[c];
            if v != T::one() {
                out.entries.push((j, v - T::one()));
            }
        }
    }
}

/// Largest observation (0 before any) and largest mean gradient on the domain.
pub fn update_penalty_state<T: Scalar>(model: &GpModel<T>, domain: &dyn SearchDomain<T>, observed_ys: &[T]) -> Result<PenaltyState<T>> {
    let posterior = Posterior::from_model(model, domain.points())?;
    Ok(PenaltyState::new(mean_gradient_max(model, domain.points()), max_or_zero(observed_ys), posterior))
}

pub fn max_or_zero<T: Scalar>(ys: &[T]) -> T {
    if ys.is_empty() {
        T::zero()
    } else {
        ys.iter().copied().fold(T::neg_infinity(), T::max)
    }
}

/// `E_theta[phi(x_i; .)]` given the row `phi(x_i; .)`.
pub fn expected_penalty<T: Scalar>(family: &dyn SamplingFamily<T>, theta: usize, row: &[T]) -> Result<T> {
    crate::dist::expect(family, theta, row)
}

/// `sum_{k<batch} p^k`.
#[inline]
pub fn geometric_weight<T: Scalar>(p: T, batch: usize) -> T {
    (1..batch).fold(T::one(), |acc, _| T::one() + p * acc)
}

/// `score[theta] = sum_x pi(x|theta) alpha(x) g_B(E_theta[row_x])` for an
/// arbitrary pairwise penalty `row`.
pub fn batch_scores_with<T: Scalar>(
    family: &dyn SamplingFamily<T>,
    alpha: &[T],
    batch: usize,
    row: &mut dyn FnMut(usize, &mut SparseRow<T>),
) -> Result<Vec<T>> {
    match batch {
        0 => Err(SsboError::InvalidParameter("batch size must be at least 1".into())),
        1 => family.expect_all(alpha),
        _ => family.expect_coupled(alpha, row, &|p| geometric_weight(p, batch)),
    }
}

/// Penalized batch scores under the current penalty state.
pub fn batch_scores<T: Scalar>(
    state: &PenaltyState<T>,
    domain: &dyn SearchDomain<T>,
    family: &dyn SamplingFamily<T>,
    alpha: &[T],
    batch: usize,
) -> Result<Vec<T>> {
    crate::acquisition::check_family(family, domain)?;
    let mut rows = RowBuilder::new(state, domain);
    batch_scores_with(family, alpha, batch, &mut |x, out| rows.fill(x, out))
}

/// Unpenalized batch scores `B * E_theta[alpha]`.
pub fn independent_scores<T: Scalar>(family: &dyn SamplingFamily<T>, alpha: &[T], batch: usize) -> Result<Vec<T>> {
    let b = T::from_usize_lossy(batch);
    Ok(family.expect_all(alpha)?.into_iter().map(|s| b * s).collect())
}

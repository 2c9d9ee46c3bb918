//! Exact Gaussian process regression over fixed-hyperparameter kernels.
//!
//! [`GpModel`] is immutable once fitted: it caches the Cholesky factor of
//! `K + noise * I` and the weights `(K + noise * I)^-1 y`. New observations
//! produce a new model through [`GpModel::with_observations`], which extends the
//! factor row by row and gives the same result as refitting from scratch.

mod cholesky;
mod kernel;
mod posterior;

pub use kernel::{KernelKind, KernelSpec};
pub use posterior::{Posterior, PosteriorCache};

use crate::error::{Result, SsboError};
use crate::scalar::Scalar;

use cholesky::{backward_solve_transposed, factor_rows, factor_with_jitter, forward_solve};

/// Negative predictive variances down to this magnitude are treated as round-off.
pub const VARIANCE_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct GpModel<T> {
    kernel: KernelSpec<T>,
    noise_variance: T,
    inputs: Vec<Vec<T>>,
    targets: Vec<T>,
    chol: Vec<T>,
    alpha: Vec<T>,
    jitter: T,
}

pub(crate) fn clamp_variance<T: Scalar>(var: T) -> Result<T> {
    if var >= T::zero() {
        Ok(var)
    } else if var >= -T::lit(VARIANCE_CLAMP) {
        Ok(T::zero())
    } else {
        Err(SsboError::NegativeVariance(var.to_f64_lossy()))
    }
}

impl<T: Scalar> GpModel<T> {
    pub fn fit(kernel: KernelSpec<T>, noise_variance: T, inputs: Vec<Vec<T>>, targets: Vec<T>) -> Result<Self> {
        if !(noise_variance >= T::zero()) {
            return Err(SsboError::InvalidParameter(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        if inputs.len() != targets.len() {
            return Err(SsboError::LengthMismatch { expected: inputs.len(), actual: targets.len() });
        }
        for x in &inputs {
            kernel.check_dim(x)?;
        }
        let n = inputs.len();
        let gram = gram_with_noise(&kernel, noise_variance, &inputs);
        let (chol, jitter) = factor_with_jitter(&gram, n).ok_or(SsboError::NonPositiveDefinite)?;
        let alpha = solve_weights(&chol, n, &targets);
        Ok(Self { kernel, noise_variance, inputs, targets, chol, alpha, jitter })
    }

    /// Returns the model conditioned on additional observations.
    pub fn with_observations(&self, inputs: &[Vec<T>], targets: &[T]) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(SsboError::LengthMismatch { expected: inputs.len(), actual: targets.len() });
        }
        for x in inputs {
            self.kernel.check_dim(x)?;
        }
        let old_n = self.len();
        let mut all_inputs = self.inputs.clone();
        all_inputs.extend(inputs.iter().cloned());
        let mut all_targets = self.targets.clone();
        all_targets.extend_from_slice(targets);
        let n = all_inputs.len();
        let gram = gram_with_noise(&self.kernel, self.noise_variance, &all_inputs);

        let mut extended = None;
        if self.jitter == T::zero() {
            let mut chol = vec![T::zero(); n * n];
            for i in 0..old_n {
                chol[i * n..i * n + old_n].copy_from_slice(&self.chol[i * old_n..(i + 1) * old_n]);
            }
            if factor_rows(&gram, &mut chol, n, old_n, T::zero()) {
                extended = Some((chol, T::zero()));
            }
        }
        let (chol, jitter) = match extended {
            Some(found) => found,
            None => factor_with_jitter(&gram, n).ok_or(SsboError::NonPositiveDefinite)?,
        };
        let alpha = solve_weights(&chol, n, &all_targets);
        Ok(Self {
            kernel: self.kernel,
            noise_variance: self.noise_variance,
            inputs: all_inputs,
            targets: all_targets,
            chol,
            alpha,
            jitter,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    pub fn noise_variance(&self) -> T {
        self.noise_variance
    }

    pub fn inputs(&self) -> &[Vec<T>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    /// Lower Cholesky factor of `K + noise * I`, row-major `n x n`.
    pub fn chol_factor(&self) -> &[T] {
        &self.chol
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    /// Relative diagonal inflation that was needed to factor the Gram matrix.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    /// Predictive mean and variance at `query`.
    pub fn predict(&self, query: &[T]) -> Result<(T, T)> {
        self.kernel.check_dim(query)?;
        let n = self.len();
        let mut v: Vec<T> = self.inputs.iter().map(|x| self.kernel.eval(x, query)).collect();
        let mut mean = T::zero();
        for i in 0..n {
            mean = mean + v[i] * self.alpha[i];
        }
        forward_solve(&self.chol, n, &mut v);
        let mut explained = T::zero();
        for &vi in &v {
            explained = explained + vi * vi;
        }
        let var = clamp_variance(self.kernel.eval(query, query) - explained)?;
        Ok((mean, var))
    }

    /// Elementwise identical to [`GpModel::predict`], solving all queries against
    /// the factor in one sweep.
    pub fn predict_batch(&self, queries: &[Vec<T>]) -> Result<Vec<(T, T)>> {
        for q in queries {
            self.kernel.check_dim(q)?;
        }
        let n = self.len();
        let m = queries.len();
        // cross[i * m + q] = k(x_i, query_q), solved in place into L^-1 K.
        let mut cross = vec![T::zero(); n * m];
        for (i, x) in self.inputs.iter().enumerate() {
            for (q, query) in queries.iter().enumerate() {
                cross[i * m + q] = self.kernel.eval(x, query);
            }
        }
        let mut mean = vec![T::zero(); m];
        for i in 0..n {
            let a = self.alpha[i];
            for (mq, &c) in mean.iter_mut().zip(&cross[i * m..(i + 1) * m]) {
                *mq = *mq + c * a;
            }
        }
        let mut explained = vec![T::zero(); m];
        for i in 0..n {
            let (solved, rest) = cross.split_at_mut(i * m);
            let row = &mut rest[..m];
            for j in 0..i {
                let lij = self.chol[i * n + j];
                for (r, &s) in row.iter_mut().zip(&solved[j * m..(j + 1) * m]) {
                    *r = *r - lij * s;
                }
            }
            let lii = self.chol[i * n + i];
            for (r, e) in row.iter_mut().zip(explained.iter_mut()) {
                *r = *r / lii;
                *e = *e + *r * *r;
            }
        }
        queries
            .iter()
            .zip(mean.into_iter().zip(explained))
            .map(|(q, (mu, e))| Ok((mu, clamp_variance(self.kernel.eval(q, q) - e)?)))
            .collect()
    }
}

fn gram_with_noise<T: Scalar>(kernel: &KernelSpec<T>, noise: T, inputs: &[Vec<T>]) -> Vec<T> {
    let n = inputs.len();
    let mut gram = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = kernel.eval(&inputs[i], &inputs[j]);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
        gram[i * n + i] = gram[i * n + i] + noise;
    }
    gram
}

fn solve_weights<T: Scalar>(chol: &[T], n: usize, targets: &[T]) -> Vec<T> {
    let mut alpha = targets.to_vec();
    forward_solve(chol, n, &mut alpha);
    backward_solve_transposed(chol, n, &mut alpha);
    alpha
}

/// Largest absolute partial derivative of the posterior mean over `points`.
///
/// Squared-exponential kernels use the analytic derivative of the mean. One-hot
/// linear kernels have no meaningful derivative, so the estimate is the largest
/// mean difference between Hamming-1 neighbours divided by their encoding
/// distance `sqrt(2)`. An empty model has a flat mean and yields 0.
pub fn mean_gradient_max<T: Scalar>(model: &GpModel<T>, points: &[Vec<T>]) -> T {
    if model.is_empty() {
        return T::zero();
    }
    let kernel = model.kernel();
    let mut best = T::zero();
    match kernel.kind {
        KernelKind::SquaredExponential { lengthscale } => {
            let inv_l2 = T::one() / (lengthscale * lengthscale);
            let dim = kernel.input_dim;
            let mut grad = vec![T::zero(); dim];
            for p in points {
                grad.iter_mut().for_each(|g| *g = T::zero());
                for (x, &a) in model.inputs().iter().zip(model.alpha()) {
                    let w = a * kernel.eval(p, x) * inv_l2;
                    for d in 0..dim {
                        grad[d] = grad[d] + w * (x[d] - p[d]);
                    }
                }
                for &g in &grad {
                    best = best.max(g.abs());
                }
            }
        }
        KernelKind::LinearOneHot { positions } => {
            // The mean is linear in the encoding: mu(x) = <w, x>.
            let dim = kernel.input_dim;
            let alphabet = dim / positions;
            let scale = kernel.signal_variance / T::from_usize_lossy(positions);
            let mut w = vec![T::zero(); dim];
            for (x, &a) in model.inputs().iter().zip(model.alpha()) {
                for d in 0..dim {
                    w[d] = w[d] + scale * a * x[d];
                }
            }
            let step = T::lit(2.0).sqrt();
            for p in points {
                for pos in 0..positions {
                    let block = &p[pos * alphabet..(pos + 1) * alphabet];
                    let current = argmax(block);
                    let base = w[pos * alphabet + current];
                    for other in (0..alphabet).filter(|&b| b != current) {
                        best = best.max((w[pos * alphabet + other] - base).abs() / step);
                    }
                }
            }
        }
    }
    best
}

fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut idx = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[idx] {
            idx = i;
        }
    }
    idx
}

/// Mutual information `I(Y_A; f) = 1/2 log det(I + K_A / noise)` of noisy
/// observations at `points`.
pub fn empirical_info_gain<T: Scalar>(kernel: &KernelSpec<T>, noise_variance: T, points: &[Vec<T>]) -> Result<T> {
    if !(noise_variance > T::zero()) {
        return Err(SsboError::InvalidParameter(format!(
            "information gain needs positive noise variance, got {noise_variance}"
        )));
    }
    for p in points {
        kernel.check_dim(p)?;
    }
    let n = points.len();
    let mut a = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&points[i], &points[j]) / noise_variance;
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
        a[i * n + i] = a[i * n + i] + T::one();
    }
    let mut l = vec![T::zero(); n * n];
    if !factor_rows(&a, &mut l, n, 0, T::zero()) {
        return Err(SsboError::NonPositiveDefinite);
    }
    Ok((0..n).map(|i| l[i * n + i].ln()).sum())
}

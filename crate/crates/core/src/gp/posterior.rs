use crate::error::Result;
use crate::scalar::Scalar;

use super::{clamp_variance, GpModel};

/// Predictive mean and variance evaluated on every point of a finite domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior<T> {
    pub mean: Vec<T>,
    pub variance: Vec<T>,
}

impl<T: Scalar> Posterior<T> {
    pub fn from_model(model: &GpModel<T>, points: &[Vec<T>]) -> Result<Self> {
        let (mean, variance) = model.predict_batch(points)?.into_iter().unzip();
        Ok(Self { mean, variance })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Incrementally maintained posterior over a fixed query set.
///
/// Keeps `V = L^-1 K(X, Q)` and `z = L^-1 y` so that appending observations to
/// the model costs `O(n |Q|)` per new row instead of a full re-solve.
/// Mean is `V^T z`, variance is `k(q, q) - |V_q|^2`.
#[derive(Debug, Clone)]
pub struct PosteriorCache<T> {
    dim: usize,
    points: Vec<T>,
    prior: Vec<T>,
    rows: Vec<T>,
    z: Vec<T>,
    diag: Vec<T>,
    mean: Vec<T>,
    explained: Vec<T>,
    jitter: T,
}

impl<T: Scalar> PosteriorCache<T> {
    pub fn new(model: &GpModel<T>, queries: &[Vec<T>]) -> Result<Self> {
        for q in queries {
            model.kernel().check_dim(q)?;
        }
        let dim = model.kernel().input_dim;
        let points: Vec<T> = queries.iter().flatten().copied().collect();
        let prior = queries.iter().map(|q| model.kernel().eval(q, q)).collect();
        let m = queries.len();
        let mut cache = Self {
            dim,
            points,
            prior,
            rows: Vec::new(),
            z: Vec::new(),
            diag: Vec::new(),
            mean: vec![T::zero(); m],
            explained: vec![T::zero(); m],
            jitter: model.jitter(),
        };
        cache.sync(model);
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.prior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prior.is_empty()
    }

    /// Number of observations folded in so far.
    pub fn observations(&self) -> usize {
        self.z.len()
    }

    /// Brings the cache in line with `model`. Appended observations are folded
    /// in row by row; any other change (refit with jitter, different data)
    /// triggers a rebuild.
    pub fn sync(&mut self, model: &GpModel<T>) {
        let n = model.len();
        let chol = model.chol_factor();
        let consistent = model.jitter() == self.jitter
            && n >= self.z.len()
            && self.diag.iter().enumerate().all(|(i, &d)| chol[i * n + i] == d);
        if !consistent {
            self.reset(model.jitter());
        }
        let m = self.len();
        let kernel = model.kernel();
        for i in self.z.len()..n {
            let x = &model.inputs()[i];
            let mut row: Vec<T> = self.points.chunks_exact(self.dim).map(|q| kernel.eval(x, q)).collect();
            let mut zi = model.targets()[i];
            for j in 0..i {
                let lij = chol[i * n + j];
                for (r, &v) in row.iter_mut().zip(&self.rows[j * m..(j + 1) * m]) {
                    *r = *r - lij * v;
                }
                zi = zi - lij * self.z[j];
            }
            let lii = chol[i * n + i];
            zi = zi / lii;
            for ((r, mu), e) in row.iter_mut().zip(self.mean.iter_mut()).zip(self.explained.iter_mut()) {
                *r = *r / lii;
                *mu = *mu + *r * zi;
                *e = *e + *r * *r;
            }
            self.rows.extend_from_slice(&row);
            self.z.push(zi);
            self.diag.push(lii);
        }
    }

    fn reset(&mut self, jitter: T) {
        self.rows.clear();
        self.z.clear();
        self.diag.clear();
        self.mean.iter_mut().for_each(|v| *v = T::zero());
        self.explained.iter_mut().for_each(|v| *v = T::zero());
        self.jitter = jitter;
    }

    pub fn mean(&self, index: usize) -> T {
        self.mean[index]
    }

    pub fn variance(&self, index: usize) -> Result<T> {
        clamp_variance(self.prior[index] - self.explained[index])
    }

    pub fn posterior(&self) -> Result<Posterior<T>> {
        let variance = (0..self.len()).map(|i| self.variance(i)).collect::<Result<Vec<_>>>()?;
        Ok(Posterior { mean: self.mean.clone(), variance })
    }
}

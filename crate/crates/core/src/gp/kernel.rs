use serde::{Deserialize, Serialize};

use crate::error::{Result, SsboError};
use crate::scalar::Scalar;

/// Covariance family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelKind<T> {
    /// `sv * exp(-|a - b|^2 / (2 l^2))`.
    SquaredExponential { lengthscale: T },
    /// `sv * <a, b> / positions` on one-hot encodings with `positions` ones per vector,
    /// so that `k(x, x) = sv`.
    LinearOneHot { positions: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec<T> {
    pub kind: KernelKind<T>,
    pub signal_variance: T,
    pub input_dim: usize,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn squared_exponential(input_dim: usize, lengthscale: T, signal_variance: T) -> Result<Self> {
        if !(lengthscale > T::zero()) {
            return Err(SsboError::InvalidParameter(format!(
                "lengthscale must be positive, got {lengthscale}"
            )));
        }
        Self::new(KernelKind::SquaredExponential { lengthscale }, signal_variance, input_dim)
    }

    pub fn linear_one_hot(input_dim: usize, positions: usize, signal_variance: T) -> Result<Self> {
        if positions == 0 {
            return Err(SsboError::InvalidParameter("one-hot kernel needs at least one position".into()));
        }
        Self::new(KernelKind::LinearOneHot { positions }, signal_variance, input_dim)
    }

    fn new(kind: KernelKind<T>, signal_variance: T, input_dim: usize) -> Result<Self> {
        if !(signal_variance > T::zero()) {
            return Err(SsboError::InvalidParameter(format!(
                "signal variance must be positive, got {signal_variance}"
            )));
        }
        if input_dim == 0 {
            return Err(SsboError::InvalidParameter("input dimension must be positive".into()));
        }
        Ok(Self { kind, signal_variance, input_dim })
    }

    #[inline]
    pub fn eval(&self, a: &[T], b: &[T]) -> T {
        debug_assert_eq!(a.len(), b.len());
        match self.kind {
            KernelKind::SquaredExponential { lengthscale } => {
                let sq: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
                self.signal_variance * (-sq / (T::lit(2.0) * lengthscale * lengthscale)).exp()
            }
            KernelKind::LinearOneHot { positions } => {
                let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
                self.signal_variance * dot / T::from_usize_lossy(positions)
            }
        }
    }

    pub fn check_dim(&self, point: &[T]) -> Result<()> {
        if point.len() != self.input_dim {
            return Err(SsboError::DimensionMismatch { expected: self.input_dim, actual: point.len() });
        }
        Ok(())
    }
}

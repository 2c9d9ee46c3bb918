//! Dense row-major lower-triangular factorization helpers.

use crate::scalar::Scalar;

/// Diagonal inflation factors tried after a plain factorization fails.
pub(crate) const JITTER_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Extends the factor `l` (rows `0..from` already valid) to rows `from..n` of `a`.
///
/// Row-by-row Cholesky–Banachiewicz: row `i` depends only on `a[i, ..=i]` and rows
/// `< i` of `l`, so extending a factor gives the same bits as factoring from scratch.
/// Returns `false` on a non-positive pivot.
pub(crate) fn factor_rows<T: Scalar>(a: &[T], l: &mut [T], n: usize, from: usize, jitter: T) -> bool {
    for i in from..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            if i == j && jitter > T::zero() {
                s = s * (T::one() + jitter);
            }
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
        for j in i + 1..n {
            l[i * n + j] = T::zero();
        }
    }
    true
}

/// Factors `a` (n x n, symmetric) with jitter escalation; returns the factor and
/// the jitter that succeeded (0 for a plain factorization).
pub(crate) fn factor_with_jitter<T: Scalar>(a: &[T], n: usize) -> Option<(Vec<T>, T)> {
    let mut l = vec![T::zero(); n * n];
    if factor_rows(a, &mut l, n, 0, T::zero()) {
        return Some((l, T::zero()));
    }
    for &eps in &JITTER_LADDER {
        let eps = T::lit(eps);
        if factor_rows(a, &mut l, n, 0, eps) {
            return Some((l, eps));
        }
    }
    None
}

/// Solves `L x = b` in place.
pub(crate) fn forward_solve<T: Scalar>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut acc = b[i];
        for j in 0..i {
            acc = acc - l[i * n + j] * b[j];
        }
        b[i] = acc / l[i * n + i];
    }
}

/// Solves `L^T x = b` in place.
pub(crate) fn backward_solve_transposed<T: Scalar>(l: &[T], n: usize, b: &mut [T]) {
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in i + 1..n {
            acc = acc - l[j * n + i] * b[j];
        }
        b[i] = acc / l[i * n + i];
    }
}

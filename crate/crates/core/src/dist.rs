//! Families of sampling distributions over a finite domain.
//!
//! A family is a finite menu `Theta` of probability mass functions
//! `pi(x | theta)`. [`ProductFamily`] covers distributions that factor over the
//! axes of a product domain (discretized normals on grids, per-position
//! mutagenesis on sequences); its expectations are computed by contracting one
//! axis at a time instead of materializing the `|Theta| x |D|` table.
//! [`TableFamily`] stores explicit sparse rows.

use std::fmt::Debug;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::domain::{GridDomain, SequenceDomain};
use crate::error::{Result, SsboError};
use crate::scalar::Scalar;

/// Row entries below this mass are dropped before renormalizing.
pub const TRUNCATION: f64 = 1e-12;

/// Default normal standard deviations as fractions of the axis length,
/// broadest first so that exact ties resolve to the widest distribution.
pub const DEFAULT_STD_FRACTIONS: [f64; 5] = [2e-1, 1e-1, 2.5e-2, 5e-3, 1e-3];

/// Default per-position mutation rates, broadest first.
pub const DEFAULT_MUTATION_RATES: [f64; 4] = [0.50, 0.30, 0.15, 0.05];

pub const DEFAULT_MEANS_PER_DIM: usize = 32;

/// The parameter chosen in one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaChoice<T> {
    pub theta_index: usize,
    pub variance_label: T,
}

pub trait SamplingFamily<T: Scalar>: Send + Sync + Debug {
    fn num_thetas(&self) -> usize;

    fn domain_size(&self) -> usize;

    /// Spread of `pi(. | theta)`: variance for normals, rate for mutagenesis.
    fn variance_label(&self, theta: usize) -> T;

    /// Non-zero entries of `pi(. | theta)` in increasing domain order.
    fn pmf_row(&self, theta: usize) -> Vec<(usize, T)>;

    fn pmf(&self, theta: usize, x: usize) -> T {
        self.pmf_row(theta).into_iter().find(|&(i, _)| i == x).map_or(T::zero(), |(_, p)| p)
    }

    /// Inverse-CDF draw from `pi(. | theta)`.
    fn sample(&self, theta: usize, rng: &mut dyn RngCore) -> usize {
        inverse_cdf(&self.pmf_row(theta), T::lit(rng.gen::<f64>()))
    }

    /// `E_theta[values]` for every theta.
    fn expect_all(&self, values: &[T]) -> Result<Vec<T>> {
        check_len(self.domain_size(), values.len())?;
        Ok((0..self.num_thetas())
            .map(|t| self.pmf_row(t).into_iter().map(|(i, p)| p * values[i]).sum())
            .collect())
    }

    /// For every theta: `sum_x pi(x|theta) * weights[x] * transform(E_theta[row_x])`,
    /// where `row(x, out)` writes the domain-indexed vector `row_x` into `out`.
    fn expect_coupled(
        &self,
        weights: &[T],
        row: &mut dyn FnMut(usize, &mut SparseRow<T>),
        transform: &dyn Fn(T) -> T,
    ) -> Result<Vec<T>> {
        let n = self.domain_size();
        check_len(n, weights.len())?;
        let mut sparse = SparseRow::default();
        let mut dense = vec![T::zero(); n];
        Ok((0..self.num_thetas())
            .map(|t| {
                let support = self.pmf_row(t);
                support
                    .iter()
                    .map(|&(x, px)| {
                        row(x, &mut sparse);
                        sparse.entries.iter().for_each(|&(y, v)| dense[y] = v);
                        let inner = sparse.baseline + support.iter().map(|&(y, py)| py * dense[y]).sum::<T>();
                        sparse.entries.iter().for_each(|&(y, _)| dense[y] = T::zero());
                        px * weights[x] * transform(inner)
                    })
                    .sum()
            })
            .collect())
    }

    /// Largest probability mass over all thetas and points.
    fn pi_star(&self) -> T {
        (0..self.num_thetas())
            .flat_map(|t| self.pmf_row(t).into_iter().map(|(_, p)| p))
            .fold(T::zero(), T::max)
    }
}

/// A domain-indexed vector stored as a constant plus sparse offsets:
/// `v[y] = baseline + offset(y)`, with `offset(y) = 0` for unlisted `y`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow<T> {
    pub baseline: T,
    /// `(index, offset)` pairs with unique indices.
    pub entries: Vec<(usize, T)>,
}

impl<T: Scalar> SparseRow<T> {
    pub fn clear(&mut self, baseline: T) {
        self.baseline = baseline;
        self.entries.clear();
    }

    pub fn to_dense(&self, len: usize) -> Vec<T> {
        let mut out = vec![self.baseline; len];
        for &(i, v) in &self.entries {
            out[i] = self.baseline + v;
        }
        out
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(SsboError::LengthMismatch { expected, actual });
    }
    Ok(())
}

fn inverse_cdf<T: Scalar>(row: &[(usize, T)], u: T) -> usize {
    let total: T = row.iter().map(|&(_, p)| p).sum();
    let target = u * total;
    let mut acc = T::zero();
    for &(i, p) in row {
        acc = acc + p;
        if target < acc {
            return i;
        }
    }
    row.last().map(|&(i, _)| i).expect("pmf row has support")
}

/// `E_theta[values]` for a single theta.
pub fn expect<T: Scalar>(family: &dyn SamplingFamily<T>, theta: usize, values: &[T]) -> Result<T> {
    check_len(family.domain_size(), values.len())?;
    check_theta(family, theta)?;
    Ok(family.pmf_row(theta).into_iter().map(|(i, p)| p * values[i]).sum())
}

pub fn sample<T: Scalar>(family: &dyn SamplingFamily<T>, theta: usize, rng: &mut dyn RngCore) -> usize {
    family.sample(theta, rng)
}

pub fn pi_star<T: Scalar>(family: &dyn SamplingFamily<T>) -> T {
    family.pi_star()
}

fn check_theta<T: Scalar>(family: &dyn SamplingFamily<T>, theta: usize) -> Result<()> {
    if theta >= family.num_thetas() {
        return Err(SsboError::InvalidParameter(format!(
            "theta index {theta} out of range for {} thetas",
            family.num_thetas()
        )));
    }
    Ok(())
}

/// Explicit sparse rows.
#[derive(Debug, Clone)]
pub struct TableFamily<T> {
    domain_size: usize,
    rows: Vec<Vec<(usize, T)>>,
    labels: Vec<T>,
}

impl<T: Scalar> TableFamily<T> {
    /// Rows are renormalized to sum to one; duplicate indices are merged.
    pub fn new(domain_size: usize, rows: Vec<Vec<(usize, T)>>, labels: Vec<T>) -> Result<Self> {
        check_len(rows.len(), labels.len())?;
        let mut clean = Vec::with_capacity(rows.len());
        for mut row in rows {
            row.sort_by_key(|&(i, _)| i);
            let mut merged: Vec<(usize, T)> = Vec::with_capacity(row.len());
            for (i, p) in row {
                if i >= domain_size {
                    return Err(SsboError::InvalidParameter(format!("row index {i} outside domain of {domain_size}")));
                }
                if !(p >= T::zero()) || !p.is_finite() {
                    return Err(SsboError::InvalidParameter(format!("invalid probability mass {p}")));
                }
                match merged.last_mut() {
                    Some(last) if last.0 == i => last.1 = last.1 + p,
                    _ => merged.push((i, p)),
                }
            }
            merged.retain(|&(_, p)| p > T::zero());
            let total: T = merged.iter().map(|&(_, p)| p).sum();
            if !(total > T::zero()) {
                return Err(SsboError::InvalidParameter("pmf row has no mass".into()));
            }
            merged.iter_mut().for_each(|e| e.1 = e.1 / total);
            clean.push(merged);
        }
        Ok(Self { domain_size, rows: clean, labels })
    }

    /// One point mass per domain point; theta `i` always yields `i`.
    pub fn point_masses(domain_size: usize) -> Self {
        let rows = (0..domain_size).map(|i| vec![(i, T::one())]).collect();
        Self { domain_size, rows, labels: vec![T::zero(); domain_size] }
    }

    pub fn uniform(domain_size: usize) -> Self {
        let p = T::one() / T::from_usize_lossy(domain_size);
        Self { domain_size, rows: vec![(0..domain_size).map(|i| (i, p)).collect()], labels: vec![T::one()] }
    }
}

impl<T: Scalar> SamplingFamily<T> for TableFamily<T> {
    fn num_thetas(&self) -> usize {
        self.rows.len()
    }

    fn domain_size(&self) -> usize {
        self.domain_size
    }

    fn variance_label(&self, theta: usize) -> T {
        self.labels[theta]
    }

    fn pmf_row(&self, theta: usize) -> Vec<(usize, T)> {
        self.rows[theta].clone()
    }
}

/// Row-stochastic matrix over one axis: rows are axis parameter values
/// (a normal mean, a starting nucleotide), columns are axis coordinates.
#[derive(Debug, Clone)]
pub struct AxisFactor<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
    band: Vec<(usize, usize)>,
    /// Column-major copy of `data`.
    data_t: Vec<T>,
    /// Smallest row range covering the positive entries of each column.
    col_band: Vec<(usize, usize)>,
    /// Rows with positive mass in each column.
    col_support: Vec<Vec<usize>>,
}

impl<T: Scalar> AxisFactor<T> {
    /// Normalizes each row, drops entries below [`TRUNCATION`], renormalizes.
    pub fn new(rows: usize, cols: usize, mut data: Vec<T>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        let cutoff = T::lit(TRUNCATION);
        let mut band = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &mut data[r * cols..(r + 1) * cols];
            if row.iter().any(|&p| !(p >= T::zero()) || !p.is_finite()) {
                return Err(SsboError::InvalidParameter("axis factor entries must be finite and non-negative".into()));
            }
            normalize(row)?;
            row.iter_mut().filter(|p| **p < cutoff).for_each(|p| *p = T::zero());
            normalize(row)?;
            let lo = row.iter().position(|&p| p > T::zero()).unwrap_or(0);
            let hi = row.iter().rposition(|&p| p > T::zero()).map_or(0, |i| i + 1);
            band.push((lo, hi));
        }
        let col_support: Vec<Vec<usize>> = (0..cols)
            .map(|c| (0..rows).filter(|&r| data[r * cols + c] > T::zero()).collect())
            .collect();
        let col_band = col_support.iter().map(|s| (s.first().copied().unwrap_or(0), s.last().map_or(0, |&r| r + 1))).collect();
        let data_t = (0..cols * rows).map(|k| data[(k % rows) * cols + k / rows]).collect();
        Ok(Self { rows, cols, data, band, data_t, col_band, col_support })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn max_entry(&self) -> T {
        self.data.iter().copied().fold(T::zero(), T::max)
    }

    fn sample_row(&self, row: usize, u: T) -> usize {
        let (lo, hi) = self.band[row];
        let mut acc = T::zero();
        for c in lo..hi {
            acc = acc + self.get(row, c);
            if u < acc {
                return c;
            }
        }
        (lo..hi).rev().find(|&c| self.get(row, c) > T::zero()).unwrap_or(lo)
    }

    /// `out[p, r, q] = sum_c self[r, col_lo + c] * input[p, c, q]` for a tensor
    /// viewed as `(pre, width, post)`.
    fn contract(&self, input: &[T], pre: usize, col_lo: usize, width: usize, post: usize, out: &mut Vec<T>) {
        out.clear();
        out.resize(pre * self.rows * post, T::zero());
        let col_hi = col_lo + width;
        if post == 1 {
            // accumulate whole columns so the inner loop runs over contiguous rows
            for p in 0..pre {
                let dst = &mut out[p * self.rows..(p + 1) * self.rows];
                for c in col_lo..col_hi {
                    let v = input[p * width + c - col_lo];
                    if v == T::zero() {
                        continue;
                    }
                    let (lo, hi) = self.col_band[c];
                    let column = &self.data_t[c * self.rows + lo..c * self.rows + hi];
                    for (d, &w) in dst[lo..hi].iter_mut().zip(column) {
                        *d = *d + w * v;
                    }
                }
            }
            return;
        }
        for r in 0..self.rows {
            let (lo, hi) = self.band[r];
            let (lo, hi) = (lo.max(col_lo), hi.min(col_hi));
            for p in 0..pre {
                let dst = &mut out[(p * self.rows + r) * post..(p * self.rows + r + 1) * post];
                for c in lo..hi {
                    let w = self.data[r * self.cols + c];
                    let src_at = (p * width + c - col_lo) * post;
                    for (d, &s) in dst.iter_mut().zip(&input[src_at..src_at + post]) {
                        *d = *d + w * s;
                    }
                }
            }
        }
    }
}

fn normalize<T: Scalar>(row: &mut [T]) -> Result<()> {
    let total: T = row.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(SsboError::InvalidParameter("axis factor row has no mass".into()));
    }
    row.iter_mut().for_each(|p| *p = *p / total);
    Ok(())
}

/// One spread level: a factor per axis plus its variance label.
#[derive(Debug, Clone)]
pub struct ProductBlock<T> {
    pub factors: Vec<AxisFactor<T>>,
    pub variance_label: T,
}

/// Distributions `pi(x | theta) = prod_a F_a[theta_a, x_a]` over a product
/// domain. Theta indices are block-major, then row-major over the per-axis
/// components (first axis slowest), matching the domain enumeration.
#[derive(Debug, Clone)]
pub struct ProductFamily<T> {
    axis_sizes: Vec<usize>,
    theta_axis_sizes: Vec<usize>,
    blocks: Vec<ProductBlock<T>>,
    block_len: usize,
    domain_size: usize,
}

impl<T: Scalar> ProductFamily<T> {
    pub fn new(blocks: Vec<ProductBlock<T>>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| SsboError::InvalidParameter("family needs at least one block".into()))?;
        let axis_sizes: Vec<usize> = first.factors.iter().map(|f| f.cols).collect();
        let theta_axis_sizes: Vec<usize> = first.factors.iter().map(|f| f.rows).collect();
        if axis_sizes.is_empty() {
            return Err(SsboError::InvalidParameter("family needs at least one axis".into()));
        }
        for b in &blocks {
            let cols: Vec<usize> = b.factors.iter().map(|f| f.cols).collect();
            let rows: Vec<usize> = b.factors.iter().map(|f| f.rows).collect();
            if cols != axis_sizes || rows != theta_axis_sizes {
                return Err(SsboError::InvalidParameter("all blocks must share axis shapes".into()));
            }
        }
        Ok(Self {
            block_len: theta_axis_sizes.iter().product(),
            domain_size: axis_sizes.iter().product(),
            axis_sizes,
            theta_axis_sizes,
            blocks,
        })
    }

    pub fn blocks(&self) -> &[ProductBlock<T>] {
        &self.blocks
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Splits a theta index into its block and per-axis components.
    pub fn theta_components(&self, theta: usize) -> (usize, Vec<usize>) {
        (theta / self.block_len, unflatten(theta % self.block_len, &self.theta_axis_sizes))
    }

    /// `E_theta[v]` for every theta of one block, where `v` is zero outside
    /// the box `[lo_a, lo_a + width_a)` and `values` holds the box row-major.
    /// The result is left in `scratch.0`.
    fn contract_block(&self, block: &ProductBlock<T>, values: &[T], lo: &[usize], width: &[usize], scratch: &mut (Vec<T>, Vec<T>)) {
        let (a, b) = scratch;
        a.clear();
        a.extend_from_slice(values);
        let mut pre = 1;
        let mut post: usize = width.iter().product();
        for (axis, factor) in block.factors.iter().enumerate() {
            post /= width[axis];
            factor.contract(a, pre, lo[axis], width[axis], post, b);
            pre *= factor.rows;
            std::mem::swap(a, b);
        }
    }
}

fn unflatten(mut flat: usize, sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for axis in (0..sizes.len()).rev() {
        out[axis] = flat % sizes[axis];
        flat /= sizes[axis];
    }
    out
}

fn flatten(idx: &[usize], sizes: &[usize]) -> usize {
    idx.iter().zip(sizes).fold(0, |acc, (&i, &s)| acc * s + i)
}

/// Visits every combination of per-axis choices (first axis slowest).
fn for_each_combination(choices: &[&[usize]], mut visit: impl FnMut(&[usize])) {
    if choices.iter().any(|c| c.is_empty()) {
        return;
    }
    let mut pos = vec![0usize; choices.len()];
    let mut current: Vec<usize> = choices.iter().map(|c| c[0]).collect();
    loop {
        visit(&current);
        let mut axis = choices.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            pos[axis] += 1;
            if pos[axis] < choices[axis].len() {
                current[axis] = choices[axis][pos[axis]];
                break;
            }
            pos[axis] = 0;
            current[axis] = choices[axis][0];
        }
    }
}

impl<T: Scalar> SamplingFamily<T> for ProductFamily<T> {
    fn num_thetas(&self) -> usize {
        self.blocks.len() * self.block_len
    }

    fn domain_size(&self) -> usize {
        self.domain_size
    }

    fn variance_label(&self, theta: usize) -> T {
        self.blocks[theta / self.block_len].variance_label
    }

    fn pmf_row(&self, theta: usize) -> Vec<(usize, T)> {
        let (b, comps) = self.theta_components(theta);
        let block = &self.blocks[b];
        let ranges: Vec<Vec<usize>> = block
            .factors
            .iter()
            .zip(&comps)
            .map(|(f, &r)| {
                let (lo, hi) = f.band[r];
                (lo..hi).filter(|&c| f.get(r, c) > T::zero()).collect()
            })
            .collect();
        let refs: Vec<&[usize]> = ranges.iter().map(|v| v.as_slice()).collect();
        let mut row = Vec::new();
        for_each_combination(&refs, |x| {
            let p = block.factors.iter().zip(&comps).zip(x).fold(T::one(), |acc, ((f, &r), &c)| acc * f.get(r, c));
            row.push((flatten(x, &self.axis_sizes), p));
        });
        row
    }

    fn pmf(&self, theta: usize, x: usize) -> T {
        let (b, comps) = self.theta_components(theta);
        let xs = unflatten(x, &self.axis_sizes);
        self.blocks[b].factors.iter().zip(comps.iter().zip(&xs)).fold(T::one(), |acc, (f, (&r, &c))| acc * f.get(r, c))
    }

    /// Independent inverse-CDF draws per axis.
    fn sample(&self, theta: usize, rng: &mut dyn RngCore) -> usize {
        let (b, comps) = self.theta_components(theta);
        let coords: Vec<usize> = self.blocks[b]
            .factors
            .iter()
            .zip(&comps)
            .map(|(f, &r)| f.sample_row(r, T::lit(rng.gen::<f64>())))
            .collect();
        flatten(&coords, &self.axis_sizes)
    }

    fn expect_all(&self, values: &[T]) -> Result<Vec<T>> {
        check_len(self.domain_size, values.len())?;
        let mut scratch = (Vec::new(), Vec::new());
        let mut out = Vec::with_capacity(self.num_thetas());
        let zeros = vec![0; self.axis_sizes.len()];
        for block in &self.blocks {
            self.contract_block(block, values, &zeros, &self.axis_sizes, &mut scratch);
            out.extend_from_slice(&scratch.0);
        }
        Ok(out)
    }

    /// Each row's offsets are contracted only over their bounding box, so rows
    /// that are constant away from `x` cost little.
    fn expect_coupled(
        &self,
        weights: &[T],
        row: &mut dyn FnMut(usize, &mut SparseRow<T>),
        transform: &dyn Fn(T) -> T,
    ) -> Result<Vec<T>> {
        check_len(self.domain_size, weights.len())?;
        let dims = self.axis_sizes.len();
        let mut strides = vec![1; dims];
        for a in (0..dims.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.axis_sizes[a + 1];
        }
        let coord = |y: usize, a: usize| (y / strides[a]) % self.axis_sizes[a];
        let mut scores = vec![T::zero(); self.num_thetas()];
        let mut sparse = SparseRow::default();
        let mut scratch = (Vec::new(), Vec::new());
        let mut boxed = Vec::new();
        let (mut lo, mut hi, mut width) = (vec![0; dims], vec![0; dims], vec![0; dims]);
        let mut box_strides = vec![1; dims];
        let mut xs = vec![0; dims];
        for x in 0..self.domain_size {
            if weights[x] == T::zero() {
                continue;
            }
            row(x, &mut sparse);
            let empty = sparse.entries.is_empty();
            if !empty {
                lo.iter_mut().for_each(|l| *l = usize::MAX);
                hi.iter_mut().for_each(|h| *h = 0);
                for &(y, _) in &sparse.entries {
                    for a in 0..dims {
                        let c = coord(y, a);
                        lo[a] = lo[a].min(c);
                        hi[a] = hi[a].max(c + 1);
                    }
                }
                for a in 0..dims {
                    width[a] = hi[a] - lo[a];
                }
                for a in (0..dims).rev() {
                    box_strides[a] = if a + 1 == dims { 1 } else { box_strides[a + 1] * width[a + 1] };
                }
                boxed.clear();
                boxed.resize(width.iter().product(), T::zero());
                for &(y, v) in &sparse.entries {
                    let local: usize = (0..dims).map(|a| (coord(y, a) - lo[a]) * box_strides[a]).sum();
                    boxed[local] = v;
                }
            }
            for (a, c) in xs.iter_mut().enumerate() {
                *c = coord(x, a);
            }
            let wx = weights[x];
            for (b, block) in self.blocks.iter().enumerate() {
                if !empty {
                    self.contract_block(block, &boxed, &lo, &width, &mut scratch);
                }
                let inner = &scratch.0;
                let (last, outer) = block.factors.split_last().expect("at least one axis");
                let x_last = xs[dims - 1];
                let (r_lo, r_hi) = last.col_band[x_last];
                let column = &last.data_t[x_last * last.rows..(x_last + 1) * last.rows];
                let n_last = last.rows;
                let supports: Vec<&[usize]> =
                    outer.iter().zip(&xs).map(|(f, &c)| f.col_support[c].as_slice()).collect();
                let block_scores = &mut scores[b * self.block_len..(b + 1) * self.block_len];
                let baseline = sparse.baseline;
                for_each_combination(&supports, |comps| {
                    let mut prefix = 0;
                    let mut p = wx;
                    for ((f, &r), (&c, &n)) in outer.iter().zip(comps).zip(xs.iter().zip(&self.theta_axis_sizes)) {
                        prefix = prefix * n + r;
                        p = p * f.get(r, c);
                    }
                    let start = prefix * n_last;
                    let dst = &mut block_scores[start + r_lo..start + r_hi];
                    if empty {
                        let g = transform(baseline);
                        for (d, &w) in dst.iter_mut().zip(&column[r_lo..r_hi]) {
                            *d = *d + p * w * g;
                        }
                    } else {
                        let src = &inner[start + r_lo..start + r_hi];
                        for ((d, &w), &v) in dst.iter_mut().zip(&column[r_lo..r_hi]).zip(src) {
                            *d = *d + p * w * transform(baseline + v);
                        }
                    }
                });
            }
        }
        Ok(scores)
    }

    fn pi_star(&self) -> T {
        self.blocks
            .iter()
            .map(|b| b.factors.iter().fold(T::one(), |acc, f| acc * f.max_entry()))
            .fold(T::zero(), T::max)
    }
}

/// `means_per_dim` evenly spaced means per axis crossed with each standard
/// deviation. Mean `k` sits on the centre of the cell containing the midpoint
/// of the `k`-th of `means_per_dim` equal bins, so a vanishing std puts all of
/// its mass on one domain point; rows are products of per-axis discretized
/// normals evaluated at cell centres.
pub fn build_grid_family<T: Scalar>(domain: &GridDomain<T>, means_per_dim: usize, stds: &[T]) -> Result<ProductFamily<T>> {
    if means_per_dim == 0 {
        return Err(SsboError::InvalidParameter("need at least one mean per dimension".into()));
    }
    if let Some(&bad) = stds.iter().find(|&&s| !(s > T::zero())) {
        return Err(SsboError::NonPositiveStd(bad.to_f64_lossy()));
    }
    if stds.is_empty() {
        return Err(SsboError::InvalidParameter("need at least one standard deviation".into()));
    }
    let blocks = stds
        .iter()
        .map(|&std| {
            let factors = (0..domain.dim())
                .map(|axis| normal_axis_factor(&domain.axis_centers(axis), &axis_means(domain, axis, means_per_dim), std))
                .collect::<Result<Vec<_>>>()?;
            Ok(ProductBlock { factors, variance_label: std * std })
        })
        .collect::<Result<Vec<_>>>()?;
    ProductFamily::new(blocks)
}

/// Grid family with stds given as fractions of each axis length.
pub fn build_grid_family_scaled<T: Scalar>(domain: &GridDomain<T>, means_per_dim: usize, fractions: &[T]) -> Result<ProductFamily<T>> {
    let side = (0..domain.dim()).map(|a| domain.side(a)).fold(T::zero(), T::max);
    let stds: Vec<T> = fractions.iter().map(|&f| f * side).collect();
    build_grid_family(domain, means_per_dim, &stds)
}

fn axis_means<T: Scalar>(domain: &GridDomain<T>, axis: usize, count: usize) -> Vec<T> {
    let centers = domain.axis_centers(axis);
    let cells = centers.len();
    (0..count).map(|k| centers[((2 * k + 1) * cells / (2 * count)).min(cells - 1)]).collect()
}

fn normal_axis_factor<T: Scalar>(centers: &[T], means: &[T], std: T) -> Result<AxisFactor<T>> {
    let two_var = T::lit(2.0) * std * std;
    let mut data = Vec::with_capacity(means.len() * centers.len());
    for &m in means {
        // Shift by the closest centre so the largest weight is exactly one.
        let closest = centers.iter().map(|&c| (c - m) * (c - m)).fold(T::infinity(), T::min);
        data.extend(centers.iter().map(|&c| (-((c - m) * (c - m) - closest) / two_var).exp()));
    }
    AxisFactor::new(means.len(), centers.len(), data)
}

/// Every start sequence crossed with each rate; each position independently
/// keeps its nucleotide with probability `1 - rate` or moves to each of the
/// other three with probability `rate / 3`.
pub fn build_mutagenesis_family<T: Scalar>(domain: &SequenceDomain<T>, rates: &[T]) -> Result<ProductFamily<T>> {
    if rates.is_empty() {
        return Err(SsboError::InvalidParameter("need at least one mutation rate".into()));
    }
    let blocks = rates
        .iter()
        .map(|&rate| {
            if !(rate > T::zero() && rate <= T::lit(0.75)) {
                return Err(SsboError::RateOutOfRange(rate.to_f64_lossy()));
            }
            let other = rate / T::lit(3.0);
            let data: Vec<T> = (0..16).map(|k| if k / 4 == k % 4 { T::one() - rate } else { other }).collect();
            let factor = AxisFactor::new(4, 4, data)?;
            Ok(ProductBlock { factors: vec![factor; domain.length()], variance_label: rate })
        })
        .collect::<Result<Vec<_>>>()?;
    ProductFamily::new(blocks)
}

#[cfg(test)]
mod tests;

//! Finite search domains: cell-centred grids over boxes and DNA sequence spaces.

use std::fmt::Debug;

use crate::error::{Result, SsboError};
use crate::scalar::Scalar;

pub const DNA_ALPHABET: [char; 4] = ['A', 'C', 'G', 'T'];

/// A finite, enumerated set of candidate points with feature encodings.
pub trait SearchDomain<T: Scalar>: Send + Sync + Debug {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Length of every feature vector.
    fn feature_dim(&self) -> usize;

    /// All feature vectors in enumeration order.
    fn points(&self) -> &[Vec<T>];

    fn label(&self, index: usize) -> String;

    /// Index of the domain point closest (Euclidean) to `features`; ties go to
    /// the lowest index.
    fn nearest(&self, features: &[T]) -> usize;

    fn distance(&self, i: usize, j: usize) -> T {
        euclidean(&self.points()[i], &self.points()[j])
    }

    /// Upper bound (exclusive) on the labels written by [`Self::distance_classes`].
    fn num_distance_classes(&self) -> usize {
        self.len()
    }

    /// Label of `j` such that points with equal labels have bitwise-equal
    /// `distance(i, .)`. The default shares nothing.
    fn distance_class(&self, _i: usize, j: usize) -> usize {
        j
    }

    /// Writes into `out`, in increasing order, a superset of the points within
    /// `radius` of `i`.
    fn neighbors_within(&self, i: usize, radius: T, out: &mut Vec<usize>) {
        out.clear();
        out.extend((0..self.len()).filter(|&j| self.distance(i, j) <= radius));
    }

    fn enumerate(&self) -> Vec<(usize, Vec<T>, String)> {
        (0..self.len()).map(|i| (i, self.points()[i].clone(), self.label(i))).collect()
    }
}

#[inline]
pub fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

/// Cell centres of a regular `cells^d` partition of `[lo, hi]^d`, row-major
/// with axis 0 varying slowest.
#[derive(Debug, Clone)]
pub struct GridDomain<T> {
    lo: Vec<T>,
    hi: Vec<T>,
    cells: usize,
    points: Vec<Vec<T>>,
}

impl<T: Scalar> GridDomain<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>, cells: usize) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(SsboError::DimensionMismatch { expected: lo.len(), actual: hi.len() });
        }
        if cells == 0 {
            return Err(SsboError::InvalidParameter("grid needs at least one cell per dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(&l, &h)| !(h > l)) {
            return Err(SsboError::InvalidParameter("grid bounds must satisfy lo < hi".into()));
        }
        let dim = lo.len();
        let total = cells
            .checked_pow(dim as u32)
            .ok_or_else(|| SsboError::InvalidParameter("grid too large".into()))?;
        let mut points = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut p = vec![T::zero(); dim];
            for axis in (0..dim).rev() {
                let k = rem % cells;
                rem /= cells;
                p[axis] = cell_center(lo[axis], hi[axis], cells, k);
            }
            points.push(p);
        }
        Ok(Self { lo, hi, cells, points })
    }

    /// Square grid `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: T, hi: T, cells: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], cells)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn cells_per_dim(&self) -> usize {
        self.cells
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    pub fn side(&self, axis: usize) -> T {
        self.hi[axis] - self.lo[axis]
    }

    /// Cell-centre coordinates along one axis.
    pub fn axis_centers(&self, axis: usize) -> Vec<T> {
        (0..self.cells).map(|k| cell_center(self.lo[axis], self.hi[axis], self.cells, k)).collect()
    }

    pub fn flat_index(&self, cell: &[usize]) -> usize {
        cell.iter().fold(0, |acc, &k| acc * self.cells + k)
    }

    fn nearest_cell(&self, axis: usize, x: T) -> usize {
        let width = self.side(axis) / T::from_usize_lossy(self.cells);
        let raw = ((x - self.lo[axis]) / width).floor();
        let max = self.cells - 1;
        let mut k = if raw <= T::zero() {
            0
        } else {
            raw.to_usize().unwrap_or(max).min(max)
        };
        if k > 0 {
            let here = (x - cell_center(self.lo[axis], self.hi[axis], self.cells, k)).abs();
            let below = (x - cell_center(self.lo[axis], self.hi[axis], self.cells, k - 1)).abs();
            if below <= here {
                k -= 1;
            }
        }
        k
    }
}

fn cell_center<T: Scalar>(lo: T, hi: T, cells: usize, k: usize) -> T {
    lo + (hi - lo) * (T::from_usize_lossy(k) + T::lit(0.5)) / T::from_usize_lossy(cells)
}

impl<T: Scalar> SearchDomain<T> for GridDomain<T> {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn feature_dim(&self) -> usize {
        self.dim()
    }

    fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    fn label(&self, index: usize) -> String {
        self.points[index].iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
    }

    fn nearest(&self, features: &[T]) -> usize {
        let cell: Vec<usize> = features.iter().enumerate().map(|(a, &x)| self.nearest_cell(a, x)).collect();
        self.flat_index(&cell)
    }

    /// Computed from cell offsets so that equal offsets give equal distances.
    fn distance(&self, i: usize, j: usize) -> T {
        let (mut i, mut j) = (i, j);
        let mut sum = T::zero();
        for axis in (0..self.dim()).rev() {
            let steps = T::from_usize_lossy((i % self.cells).abs_diff(j % self.cells));
            let d = steps * self.side(axis) / T::from_usize_lossy(self.cells);
            sum = sum + d * d;
            i /= self.cells;
            j /= self.cells;
        }
        sum.sqrt()
    }

    fn num_distance_classes(&self) -> usize {
        self.points.len()
    }

    /// Label `j` by its per-axis absolute cell offsets from `i`.
    fn distance_class(&self, i: usize, j: usize) -> usize {
        let (mut i, mut j) = (i, j);
        let (mut class, mut stride) = (0, 1);
        for _ in 0..self.dim() {
            class += stride * (i % self.cells).abs_diff(j % self.cells);
            stride *= self.cells;
            i /= self.cells;
            j /= self.cells;
        }
        class
    }

    /// Every cell of the axis-aligned box enclosing the ball.
    fn neighbors_within(&self, i: usize, radius: T, out: &mut Vec<usize>) {
        out.clear();
        if !(radius >= T::zero()) {
            return;
        }
        let dims = self.dim();
        let mut ranges = Vec::with_capacity(dims);
        let mut rest = i;
        let mut origin = vec![0; dims];
        for axis in (0..dims).rev() {
            origin[axis] = rest % self.cells;
            rest /= self.cells;
        }
        for (axis, &o) in origin.iter().enumerate() {
            let width = self.side(axis) / T::from_usize_lossy(self.cells);
            let steps = (radius / width).floor().to_usize().unwrap_or(self.cells).min(self.cells);
            ranges.push((o.saturating_sub(steps), (o + steps + 1).min(self.cells)));
        }
        push_box(&ranges, self.cells, 0, 0, out);
    }
}

fn push_box(ranges: &[(usize, usize)], cells: usize, axis: usize, acc: usize, out: &mut Vec<usize>) {
    if axis == ranges.len() {
        out.push(acc);
        return;
    }
    for k in ranges[axis].0..ranges[axis].1 {
        push_box(ranges, cells, axis + 1, acc * cells + k, out);
    }
}

/// Every DNA sequence of a fixed length, lexicographic (A < C < G < T) with the
/// first position varying slowest, one-hot encoded (4 features per position).
#[derive(Debug, Clone)]
pub struct SequenceDomain<T> {
    length: usize,
    sequences: Vec<Vec<u8>>,
    points: Vec<Vec<T>>,
}

impl<T: Scalar> SequenceDomain<T> {
    pub fn new(length: usize) -> Result<Self> {
        if length == 0 || length > 10 {
            return Err(SsboError::InvalidParameter(format!("sequence length {length} outside 1..=10")));
        }
        let total = 4usize.pow(length as u32);
        let mut sequences = Vec::with_capacity(total);
        for flat in 0..total {
            let mut seq = vec![0u8; length];
            let mut rem = flat;
            for pos in (0..length).rev() {
                seq[pos] = (rem % 4) as u8;
                rem /= 4;
            }
            sequences.push(seq);
        }
        let points = sequences.iter().map(|s| encode(s)).collect();
        Ok(Self { length, sequences, points })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn sequence(&self, index: usize) -> &[u8] {
        &self.sequences[index]
    }

    pub fn index_of(&self, seq: &[u8]) -> usize {
        seq.iter().fold(0, |acc, &c| acc * 4 + c as usize)
    }

    pub fn hamming(&self, i: usize, j: usize) -> usize {
        self.sequences[i].iter().zip(&self.sequences[j]).filter(|(a, b)| a != b).count()
    }

    /// Parses a label such as `"ACGTA"`.
    pub fn parse(&self, label: &str) -> Result<Vec<u8>> {
        if label.len() != self.length {
            return Err(SsboError::LengthMismatch { expected: self.length, actual: label.len() });
        }
        label
            .chars()
            .map(|c| {
                DNA_ALPHABET
                    .iter()
                    .position(|&a| a == c.to_ascii_uppercase())
                    .map(|p| p as u8)
                    .ok_or_else(|| SsboError::InvalidParameter(format!("invalid nucleotide {c:?}")))
            })
            .collect()
    }
}

pub fn encode<T: Scalar>(seq: &[u8]) -> Vec<T> {
    let mut v = vec![T::zero(); seq.len() * 4];
    for (pos, &c) in seq.iter().enumerate() {
        v[pos * 4 + c as usize] = T::one();
    }
    v
}

/// Nearest sequence to an arbitrary encoding: per-position largest entry.
pub fn decode<T: Scalar>(features: &[T]) -> Vec<u8> {
    features
        .chunks_exact(4)
        .map(|block| {
            let mut best = 0;
            for k in 1..4 {
                if block[k] > block[best] {
                    best = k;
                }
            }
            best as u8
        })
        .collect()
}

pub fn sequence_label(seq: &[u8]) -> String {
    seq.iter().map(|&c| DNA_ALPHABET[c as usize]).collect()
}

impl<T: Scalar> SearchDomain<T> for SequenceDomain<T> {
    fn len(&self) -> usize {
        self.sequences.len()
    }

    fn feature_dim(&self) -> usize {
        self.length * 4
    }

    fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    fn label(&self, index: usize) -> String {
        sequence_label(&self.sequences[index])
    }

    // Distance to a one-hot vector decomposes per position, and within a position
    // is minimized by the largest coordinate.
    fn nearest(&self, features: &[T]) -> usize {
        self.index_of(&decode(features))
    }

    fn distance(&self, i: usize, j: usize) -> T {
        (T::lit(2.0) * T::from_usize_lossy(self.hamming(i, j))).sqrt()
    }

    fn num_distance_classes(&self) -> usize {
        self.length + 1
    }

    fn distance_class(&self, i: usize, j: usize) -> usize {
        self.hamming(i, j)
    }
}

/// Exact maximizer over the enumeration; ties go to the lowest index.
pub fn argmax_truth<T, F>(domain: &dyn SearchDomain<T>, mut objective: F) -> Result<(usize, T)>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<T>,
{
    let mut best: Option<(usize, T)> = None;
    for (i, p) in domain.points().iter().enumerate() {
        let v = objective(p)?;
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.ok_or_else(|| SsboError::InvalidParameter("empty domain".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_midpoints() {
        let g = GridDomain::cube(1, 0.0, 1.0, 2).unwrap();
        assert_eq!(g.points(), &[vec![0.25], vec![0.75]]);
    }

    #[test]
    fn grid_is_complete_unique_and_interior() {
        let g = GridDomain::cube(2, -1.0, 3.0, 32).unwrap();
        assert_eq!(g.len(), 1024);
        for (i, p) in g.points().iter().enumerate() {
            assert!(p.iter().all(|&x| x > -1.0 && x < 3.0));
            for q in &g.points()[..i] {
                assert_ne!(p, q);
            }
        }
        // Row-major: second coordinate varies fastest.
        assert_eq!(g.points()[1][0], g.points()[0][0]);
        assert!(g.points()[1][1] > g.points()[0][1]);
    }

    #[test]
    fn sequence_enumeration() {
        let s = SequenceDomain::<f64>::new(5).unwrap();
        assert_eq!(s.len(), 1024);
        assert_eq!(s.label(0), "AAAAA");
        assert_eq!(s.label(1), "AAAAC");
        assert_eq!(s.label(1023), "TTTTT");
        assert!(s.points().iter().all(|p| p.iter().sum::<f64>() == 5.0 && p.len() == 20));
        assert_eq!(s.index_of(&s.parse("GATTC").unwrap()), s.points().iter().position(|p| *p == encode::<f64>(&s.parse("GATTC").unwrap())).unwrap());
    }

    #[test]
    fn hamming_matches_encoding_distance() {
        let s = SequenceDomain::<f64>::new(3).unwrap();
        for i in 0..s.len() {
            for j in 0..s.len() {
                let d = euclidean(&s.points()[i], &s.points()[j]);
                assert!((d - (2.0 * s.hamming(i, j) as f64).sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn encoding_round_trips_through_nearest() {
        let g = GridDomain::cube(2, -5.0, 5.0, 16).unwrap();
        for (i, p) in g.points().iter().enumerate() {
            assert_eq!(g.nearest(p), i);
        }
        let s = SequenceDomain::<f64>::new(4).unwrap();
        for (i, p) in s.points().iter().enumerate() {
            assert_eq!(s.nearest(p), i);
            assert_eq!(s.index_of(&s.parse(&s.label(i)).unwrap()), i);
        }
    }

    #[test]
    fn nearest_breaks_ties_low_and_clamps() {
        let g = GridDomain::cube(1, 0.0, 1.0, 2).unwrap();
        assert_eq!(g.nearest(&[0.5]), 0);
        assert_eq!(g.nearest(&[-3.0]), 0);
        assert_eq!(g.nearest(&[7.0]), 1);
        let s = SequenceDomain::<f64>::new(2).unwrap();
        assert_eq!(s.label(s.nearest(&[0.25; 8])), "AA");
    }

    #[test]
    fn distance_classes_group_equal_distances() {
        let g = GridDomain::<f64>::new(vec![0.0, -1.0], vec![2.0, 3.0], 6).unwrap();
        let s = SequenceDomain::<f64>::new(3).unwrap();
        let domains: [&dyn SearchDomain<f64>; 2] = [&g, &s];
        for d in domains {
            for i in [0, 7, d.len() - 1] {
                let mut seen = std::collections::HashMap::new();
                for j in 0..d.len() {
                    let class = d.distance_class(i, j);
                    assert!(class < d.num_distance_classes());
                    let dist = d.distance(i, j);
                    let first = *seen.entry(class).or_insert(dist);
                    assert_eq!(first.to_bits(), dist.to_bits());
                    assert!((dist - euclidean(&d.points()[i], &d.points()[j])).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn neighbors_cover_the_ball() {
        let g = GridDomain::<f64>::new(vec![0.0, -1.0], vec![2.0, 3.0], 9).unwrap();
        let s = SequenceDomain::<f64>::new(3).unwrap();
        let domains: [&dyn SearchDomain<f64>; 2] = [&g, &s];
        let mut out = Vec::new();
        for d in domains {
            for i in [0, 13, d.len() - 1] {
                for r in [-1.0, 0.0, 0.3, 0.9, 1.5, 10.0] {
                    d.neighbors_within(i, r, &mut out);
                    assert!(out.windows(2).all(|w| w[0] < w[1]));
                    for j in 0..d.len() {
                        if d.distance(i, j) <= r {
                            assert!(out.contains(&j), "i {i} j {j} r {r}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn argmax_ties_go_low() {
        let g = GridDomain::cube(2, 0.0, 1.0, 4).unwrap();
        assert_eq!(argmax_truth(&g, |_| Ok(3.0)).unwrap(), (0, 3.0));
        let (i, v) = argmax_truth(&g, |p: &[f64]| Ok(-(p[0] - 0.6).powi(2) - (p[1] - 0.1).powi(2))).unwrap();
        assert_eq!(g.points()[i], vec![0.625, 0.125]);
        assert!(v < 0.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridDomain::<f64>::new(vec![0.0], vec![0.0], 4).is_err());
        assert!(GridDomain::<f64>::new(vec![0.0], vec![1.0, 2.0], 4).is_err());
        assert!(GridDomain::<f64>::cube(2, 0.0, 1.0, 0).is_err());
        assert!(SequenceDomain::<f64>::new(0).is_err());
    }
}

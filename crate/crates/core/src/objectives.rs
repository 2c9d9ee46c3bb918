//! Benchmark objectives, negated so that larger is better, and a seeded
//! synthetic sequence-fitness oracle.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{decode, SearchDomain, SequenceDomain, DNA_ALPHABET};
use crate::error::{Result, SsboError};
use crate::scalar::Scalar;

pub const DEFAULT_MICHALEWICZ_M: u32 = 10;

/// Scale applied to the quadratic coefficients of a [`SeqOracle`].
pub const QUADRATIC_SCALE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObjectiveSpec {
    Ackley,
    Michalewicz { m: u32 },
    Rastrigin,
    Schwefel,
    SeqLinearQuadratic { seed: u64 },
}

impl ObjectiveSpec {
    pub const GRID_NAMES: [&'static str; 4] = ["ackley", "michalewicz", "rastrigin", "schwefel"];

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveSpec::Ackley => "ackley",
            ObjectiveSpec::Michalewicz { .. } => "michalewicz",
            ObjectiveSpec::Rastrigin => "rastrigin",
            ObjectiveSpec::Schwefel => "schwefel",
            ObjectiveSpec::SeqLinearQuadratic { .. } => "seq-linear-quadratic",
        }
    }

    /// Box bounds shared by every coordinate; `None` for sequence objectives.
    pub fn range(&self) -> Option<(f64, f64)> {
        match self {
            ObjectiveSpec::Ackley => Some((-32.768, 32.768)),
            ObjectiveSpec::Michalewicz { .. } => Some((0.0, std::f64::consts::PI)),
            ObjectiveSpec::Rastrigin => Some((-5.12, 5.12)),
            ObjectiveSpec::Schwefel => Some((-500.0, 500.0)),
            ObjectiveSpec::SeqLinearQuadratic { .. } => None,
        }
    }

    pub fn is_sequence(&self) -> bool {
        matches!(self, ObjectiveSpec::SeqLinearQuadratic { .. })
    }

    /// Materializes the objective; sequence oracles draw their coefficients
    /// for sequences of `length`.
    pub fn build(&self, length: usize) -> Objective {
        let oracle = match *self {
            ObjectiveSpec::SeqLinearQuadratic { seed } => Some(SeqOracle::new(length, seed)),
            _ => None,
        };
        Objective { spec: *self, oracle }
    }
}

impl fmt::Display for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveSpec::SeqLinearQuadratic { seed } => write!(f, "seq-linear-quadratic-{seed}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for ObjectiveSpec {
    type Err = SsboError;

    /// Accepts the grid names and `seq-linear-quadratic[-<seed>]` (seed 0 by default).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ackley" => Ok(ObjectiveSpec::Ackley),
            "michalewicz" => Ok(ObjectiveSpec::Michalewicz { m: DEFAULT_MICHALEWICZ_M }),
            "rastrigin" => Ok(ObjectiveSpec::Rastrigin),
            "schwefel" => Ok(ObjectiveSpec::Schwefel),
            "seq-linear-quadratic" => Ok(ObjectiveSpec::SeqLinearQuadratic { seed: 0 }),
            _ => s
                .strip_prefix("seq-linear-quadratic-")
                .and_then(|seed| seed.parse().ok())
                .map(|seed| ObjectiveSpec::SeqLinearQuadratic { seed })
                .ok_or_else(|| SsboError::InvalidParameter(format!("unknown objective '{s}'"))),
        }
    }
}

/// An evaluable objective.
#[derive(Debug, Clone)]
pub struct Objective {
    spec: ObjectiveSpec,
    oracle: Option<SeqOracle>,
}

impl Objective {
    pub fn spec(&self) -> ObjectiveSpec {
        self.spec
    }

    pub fn oracle(&self) -> Option<&SeqOracle> {
        self.oracle.as_ref()
    }

    /// Grid objectives take coordinates; sequence objectives take one-hot
    /// encodings.
    pub fn evaluate<T: Scalar>(&self, point: &[T]) -> Result<T> {
        if let Some(oracle) = &self.oracle {
            check_one_hot(point, oracle.length())?;
            return Ok(T::lit(oracle.evaluate(&decode(point))));
        }
        let (lo, hi) = self.spec.range().expect("grid objective has a range");
        for &x in point {
            let v = x.to_f64_lossy();
            if !(v >= lo && v <= hi) {
                return Err(SsboError::OutOfRange { value: v, lo, hi });
            }
        }
        Ok(match self.spec {
            ObjectiveSpec::Ackley => -ackley(point),
            ObjectiveSpec::Michalewicz { m } => -michalewicz(point, m),
            ObjectiveSpec::Rastrigin => -rastrigin(point),
            ObjectiveSpec::Schwefel => -schwefel(point),
            ObjectiveSpec::SeqLinearQuadratic { .. } => unreachable!(),
        })
    }

    /// Objective values at every domain point.
    pub fn evaluate_domain<T: Scalar>(&self, domain: &dyn SearchDomain<T>) -> Result<Vec<T>> {
        domain.points().iter().map(|p| self.evaluate(p)).collect()
    }
}

fn check_one_hot<T: Scalar>(point: &[T], length: usize) -> Result<()> {
    let alphabet = DNA_ALPHABET.len();
    if point.len() != length * alphabet {
        return Err(SsboError::DimensionMismatch { expected: length * alphabet, actual: point.len() });
    }
    for block in point.chunks(alphabet) {
        let ones = block.iter().filter(|&&v| v == T::one()).count();
        let zeros = block.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || zeros != alphabet - 1 {
            let bad = block.iter().find(|&&v| v != T::zero() && v != T::one()).copied().unwrap_or(T::one());
            return Err(SsboError::OutOfRange { value: bad.to_f64_lossy(), lo: 0.0, hi: 1.0 });
        }
    }
    Ok(())
}

fn ackley<T: Scalar>(x: &[T]) -> T {
    let d = T::from_usize_lossy(x.len());
    let two_pi = T::lit(2.0) * T::PI();
    let sq = x.iter().map(|&v| v * v).sum::<T>() / d;
    let cos = x.iter().map(|&v| (two_pi * v).cos()).sum::<T>() / d;
    -T::lit(20.0) * (-T::lit(0.2) * sq.sqrt()).exp() - cos.exp() + T::lit(20.0) + T::one().exp()
}

fn michalewicz<T: Scalar>(x: &[T], m: u32) -> T {
    -x.iter()
        .enumerate()
        .map(|(i, &v)| v.sin() * (T::from_usize_lossy(i + 1) * v * v / T::PI()).sin().powi(2 * m as i32))
        .sum::<T>()
}

fn rastrigin<T: Scalar>(x: &[T]) -> T {
    let two_pi = T::lit(2.0) * T::PI();
    T::lit(10.0) * T::from_usize_lossy(x.len())
        + x.iter().map(|&v| v * v - T::lit(10.0) * (two_pi * v).cos()).sum::<T>()
}

fn schwefel<T: Scalar>(x: &[T]) -> T {
    T::lit(418.9829) * T::from_usize_lossy(x.len()) - x.iter().map(|&v| v * v.abs().sqrt().sin()).sum::<T>()
}

/// `f(s) = sum_i L_i(s_i) + sum_{i<j} Q_ij(s_i, s_j)` with seeded standard
/// normal coefficients; quadratic terms are scaled by [`QUADRATIC_SCALE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqOracle {
    pub seed: u64,
    /// `length x 4`, row-major by position.
    pub linear: Vec<[f64; 4]>,
    /// One `4 x 4` table per position pair `(i, j)`, `i < j`, lexicographic.
    pub quadratic: Vec<((usize, usize), [[f64; 4]; 4])>,
}

impl SeqOracle {
    pub fn new(length: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let linear = (0..length).map(|_| [draw(), draw(), draw(), draw()]).collect();
        let mut quadratic = Vec::new();
        for i in 0..length {
            for j in i + 1..length {
                let mut table = [[0.0; 4]; 4];
                for row in table.iter_mut() {
                    for v in row.iter_mut() {
                        *v = QUADRATIC_SCALE * draw();
                    }
                }
                quadratic.push(((i, j), table));
            }
        }
        Self { seed, linear, quadratic }
    }

    pub fn from_tables(seed: u64, linear: Vec<[f64; 4]>, quadratic: Vec<((usize, usize), [[f64; 4]; 4])>) -> Self {
        Self { seed, linear, quadratic }
    }

    pub fn length(&self) -> usize {
        self.linear.len()
    }

    /// Fitness of a sequence given as nucleotide indices (0..4).
    pub fn evaluate(&self, seq: &[u8]) -> f64 {
        let lin: f64 = self.linear.iter().zip(seq).map(|(row, &s)| row[s as usize]).sum();
        let quad: f64 = self.quadratic.iter().map(|&((i, j), t)| t[seq[i] as usize][seq[j] as usize]).sum();
        lin + quad
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusStats {
    pub radius: usize,
    /// Sequences at exactly this Hamming distance from the global optimum.
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sequences no worse than every sequence within this Hamming radius.
    pub local_optima: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub argmax: usize,
    pub histogram: Vec<HistogramBin>,
    pub by_radius: Vec<RadiusStats>,
}

pub const LANDSCAPE_BINS: usize = 20;
pub const LANDSCAPE_MAX_RADIUS: usize = 4;

/// Exhaustive summary of an oracle over every sequence of its length.
pub fn fitness_landscape_stats(oracle: &SeqOracle) -> Result<LandscapeStats> {
    let domain = SequenceDomain::<f64>::new(oracle.length())?;
    let values: Vec<f64> = (0..domain.len()).map(|i| oracle.evaluate(domain.sequence(i))).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let argmax = values.iter().position(|&v| v == max).unwrap_or(0);
    let width = (max - min) / LANDSCAPE_BINS as f64;
    let mut histogram: Vec<HistogramBin> = (0..LANDSCAPE_BINS)
        .map(|b| HistogramBin { lo: min + width * b as f64, hi: min + width * (b + 1) as f64, count: 0 })
        .collect();
    for &v in &values {
        let b = if width > 0.0 { (((v - min) / width) as usize).min(LANDSCAPE_BINS - 1) } else { 0 };
        histogram[b].count += 1;
    }
    let by_radius = (1..=LANDSCAPE_MAX_RADIUS.min(oracle.length()))
        .map(|radius| {
            let ring: Vec<f64> =
                (0..domain.len()).filter(|&i| domain.hamming(argmax, i) == radius).map(|i| values[i]).collect();
            let local_optima = (0..domain.len())
                .filter(|&i| (0..domain.len()).all(|j| domain.hamming(i, j) > radius || values[j] <= values[i]))
                .count();
            RadiusStats {
                radius,
                count: ring.len(),
                mean: ring.iter().sum::<f64>() / ring.len().max(1) as f64,
                min: ring.iter().copied().fold(f64::INFINITY, f64::min),
                max: ring.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                local_optima,
            }
        })
        .collect();
    Ok(LandscapeStats { count: values.len(), mean, std, min, max, argmax, histogram, by_radius })
}

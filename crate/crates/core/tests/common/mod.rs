//! Property checks shared by the integration and acceptance targets. Each
//! returns the first counterexample as an error string.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use ssbo::acquisition::{beta_at, AcquisitionKind, BetaSchedule};
use ssbo::dist::{build_grid_family, build_mutagenesis_family, SamplingFamily};
use ssbo::domain::{GridDomain, SequenceDomain};
use ssbo::gp::{empirical_info_gain, GpModel, KernelSpec};
use ssbo::metrics::c1;
use ssbo::objectives::ObjectiveSpec;
use ssbo::optimizer::{run, DomainSpec, FamilySpec, KernelChoice, Mode, ProblemSpec, RunSettings};
use ssbo::penalty::penalty_value;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

fn finish(name: &str, r: Result<(), proptest::test_runner::TestError<impl std::fmt::Debug>>) -> Result<(), String> {
    r.map_err(|e| format!("{name}: {e}"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

/// Penalty lies in [0, 1] and does not decrease with distance.
pub fn penalty_range_and_monotonicity() -> Result<(), String> {
    let strat = (0.0f64..20.0, -3.0f64..3.0, -3.0f64..3.0, 0.0f64..2.0, 0.0f64..3.0, 0.0f64..1.0);
    finish(
        "penalty",
        runner(512).run(&strat, |(l, m, mu, var, d, step)| {
            let a = penalty_value(l, m, mu, var, d);
            let b = penalty_value(l, m, mu, var, d + step);
            ensure((0.0..=1.0).contains(&a), || format!("phi = {a}"))?;
            ensure(b >= a, || format!("phi({}) = {b} < phi({d}) = {a}", d + step))
        }),
    )
}

/// Every family row is a probability vector.
pub fn rows_are_stochastic() -> Result<(), String> {
    let grid = (1usize..3, 2usize..10, 1usize..5, prop::collection::vec(0.01f64..0.5, 1..4));
    finish(
        "grid rows",
        runner(48).run(&grid, |(dim, cells, means, stds)| {
            let d = GridDomain::<f64>::cube(dim, -1.0, 2.0, cells).unwrap();
            let f = build_grid_family(&d, means, &stds).unwrap();
            for t in 0..f.num_thetas() {
                let row = f.pmf_row(t);
                ensure(row.iter().all(|&(_, p)| p >= 0.0), || format!("negative mass in row {t}"))?;
                let s: f64 = row.iter().map(|&(_, p)| p).sum();
                ensure((s - 1.0).abs() <= 1e-12, || format!("row {t} sums to {s}"))?;
            }
            Ok(())
        }),
    )?;
    let seq = (1usize..4, prop::collection::vec(0.01f64..0.75, 1..4));
    finish(
        "mutagenesis rows",
        runner(24).run(&seq, |(len, rates)| {
            let d = SequenceDomain::<f64>::new(len).unwrap();
            let f = build_mutagenesis_family(&d, &rates).unwrap();
            for t in 0..f.num_thetas() {
                let s: f64 = f.pmf_row(t).iter().map(|&(_, p)| p).sum();
                ensure((s - 1.0).abs() <= 1e-12, || format!("row {t} sums to {s}"))?;
            }
            Ok(())
        }),
    )
}

fn small_problem(objective: ObjectiveSpec) -> ProblemSpec {
    ProblemSpec {
        objective,
        domain: DomainSpec::Grid { dim: 2, cells_per_dim: 12 },
        family: FamilySpec::Normal { means_per_dim: 6, std_fractions: vec![0.2, 0.05, 0.001] },
        kernel: KernelChoice::SquaredExponential { lengthscale_fraction: 0.1, signal_variance: 1.0 },
    }
}

fn run_strategy() -> impl Strategy<Value = (usize, usize, usize, u64, bool)> {
    (0usize..4, 0usize..5, 1usize..5, 0u64..10_000, any::<bool>())
}

/// Simple regret never increases and instantaneous regret is non-negative.
pub fn simple_regret_monotone() -> Result<(), String> {
    finish(
        "simple regret",
        runner(24).run(&run_strategy(), |(o, k, b, seed, batch)| {
            let objective = ObjectiveSpec::GRID_NAMES[o].parse::<ObjectiveSpec>().unwrap();
            let p = small_problem(objective).build::<f64>().unwrap();
            let mut s = RunSettings::new(AcquisitionKind::ALL[k], b, seed, 0);
            s.total_observations = 20;
            let tr = run(&p, &s, if batch { Mode::Batch } else { Mode::Sequential }).unwrap();
            let r = tr.simple_regret();
            ensure(r.windows(2).all(|w| w[1] <= w[0]), || format!("simple regret rose: {r:?}"))?;
            ensure(tr.instantaneous_regret().iter().all(|&v| v >= 0.0), || "negative regret".into())
        }),
    )
}

fn points_strategy(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..max)
}

/// Conditioning on one more observation never raises the posterior
/// variance, which stays within the prior variance.
pub fn posterior_variance_monotone() -> Result<(), String> {
    let strat = (points_strategy(15), prop::collection::vec(0.0f64..1.0, 2), 0.05f64..1.0, 1e-3f64..0.5);
    finish(
        "posterior variance",
        runner(64).run(&strat, |(xs, q, ell, noise)| {
            let kernel = KernelSpec::squared_exponential(2, ell, 1.0).unwrap();
            let mut prev = 1.0;
            for n in 0..=xs.len() {
                let m = GpModel::fit(kernel.clone(), noise, xs[..n].to_vec(), vec![0.3; n]).unwrap();
                let (_, v) = m.predict(&q).unwrap();
                ensure(v <= prev + 1e-12 && v >= 0.0, || format!("variance {v} after {n} points, previously {prev}"))?;
                prev = v;
            }
            Ok(())
        }),
    )
}

/// Sum over t of 1/2 ln(1 + sigma_{t-1}^2(x_t) / noise) for a GP
/// conditioned on x_1..x_{t-1}.
pub fn telescoped_info_gain(kernel: &KernelSpec<f64>, noise: f64, points: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let mut variances = Vec::with_capacity(points.len());
    let mut model = GpModel::fit(kernel.clone(), noise, Vec::new(), Vec::new()).unwrap();
    for (t, x) in points.iter().enumerate() {
        let (_, v) = model.predict(x).unwrap();
        variances.push(v);
        total += 0.5 * (1.0 + v / noise).ln();
        model = model.with_observations(&points[t..t + 1], &[0.0]).unwrap();
    }
    (total, variances)
}

/// The log-determinant information gain equals the sum of per-step gains.
pub fn info_gain_telescopes() -> Result<(), String> {
    let strat = (points_strategy(25), 0.05f64..1.0, 1e-3f64..0.5);
    finish(
        "info gain",
        runner(64).run(&strat, |(xs, ell, noise)| {
            let kernel = KernelSpec::squared_exponential(2, ell, 1.0).unwrap();
            let direct = empirical_info_gain(&kernel, noise, &xs).unwrap();
            let (sum, _) = telescoped_info_gain(&kernel, noise, &xs);
            ensure((direct - sum).abs() <= 1e-8 * direct.abs().max(1.0), || format!("{direct} vs {sum}"))
        }),
    )
}

/// On run traces: sum_t 4 beta_t sigma_{t-1}^2(x_t) <= beta_T C1 I(Y_T; f).
pub fn variance_sum_inequality_on_traces() -> Result<(), String> {
    finish(
        "variance sum",
        runner(16).run(&run_strategy(), |(o, k, b, seed, batch)| {
            let objective = ObjectiveSpec::GRID_NAMES[o].parse::<ObjectiveSpec>().unwrap();
            let p = small_problem(objective).build::<f64>().unwrap();
            let mut s = RunSettings::new(AcquisitionKind::ALL[k], b, seed, 0);
            s.total_observations = 30;
            let tr = run(&p, &s, if batch { Mode::Batch } else { Mode::Sequential }).unwrap();
            let (_, scale) = p.standardization();
            let noise = p.default_noise_variance() / (scale * scale);
            let points: Vec<Vec<f64>> = tr.observations.iter().map(|o| p.domain.points()[o.x_index].clone()).collect();
            let (gain, variances) = telescoped_info_gain(&p.kernel, noise, &points);
            let schedule = BetaSchedule::<f64>::default();
            let n = p.domain.len();
            let lhs: f64 = variances.iter().enumerate().map(|(t, v)| 4.0 * beta_at(&schedule, t + 1, n) * v).sum();
            let rhs = beta_at(&schedule, points.len(), n) * c1(noise) * gain;
            ensure(lhs <= rhs * (1.0 + 1e-9), || format!("{lhs} > {rhs}"))
        }),
    )
}

pub const ALL_CHECKS: [(&str, fn() -> Result<(), String>); 6] = [
    ("penalty range and monotonicity", penalty_range_and_monotonicity),
    ("row stochasticity", rows_are_stochastic),
    ("simple regret monotone", simple_regret_monotone),
    ("posterior variance monotone", posterior_variance_monotone),
    ("info gain telescoping", info_gain_telescopes),
    ("variance-sum inequality on traces", variance_sum_inequality_on_traces),
];

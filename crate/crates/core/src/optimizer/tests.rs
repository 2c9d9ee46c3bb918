use super::*;
use crate::acquisition::BetaSchedule;
use crate::dist::TableFamily;

fn line_problem(cells: usize, truth: Vec<f64>) -> Problem<f64> {
    let domain = GridDomain::<f64>::cube(1, 0.0, 1.0, cells).unwrap();
    let kernel = KernelSpec::squared_exponential(1, 0.3, 1.0).unwrap();
    Problem::new(Arc::new(domain), Arc::new(TableFamily::point_masses(cells)), kernel, truth).unwrap()
}

fn settings(kind: AcquisitionKind, batch: usize, total: usize, seed: u64) -> RunSettings<f64> {
    let mut s = RunSettings::new(kind, batch, seed, 0);
    s.total_observations = total;
    s
}

fn small_grid_problem() -> Problem<f64> {
    let spec = ProblemSpec {
        objective: ObjectiveSpec::Ackley,
        domain: DomainSpec::Grid { dim: 2, cells_per_dim: 16 },
        family: FamilySpec::Normal { means_per_dim: 8, std_fractions: vec![0.2, 0.05, 0.001] },
        kernel: KernelChoice::SquaredExponential { lengthscale_fraction: 0.1, signal_variance: 1.0 },
    };
    spec.build().unwrap()
}

// Dense GP posterior by Gaussian elimination, written independently of gp.
fn reference_posterior(xs: &[f64], ys: &[f64], noise: f64, ell: f64, q: f64) -> (f64, f64) {
    let k = |a: f64, b: f64| (-(a - b) * (a - b) / (2.0 * ell * ell)).exp();
    let n = xs.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| k(xs[i], xs[j]) + if i == j { noise } else { 0.0 }).collect();
            row.push(ys[i]);
            row.push(k(xs[i], q));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..n + 2 {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    let alpha: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
    let v: Vec<f64> = (0..n).map(|i| a[i][n + 1] / a[i][i]).collect();
    let kq: Vec<f64> = xs.iter().map(|&x| k(x, q)).collect();
    let mean = kq.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let var = 1.0 - kq.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
    (mean, var.max(0.0))
}

#[test]
fn point_masses_reproduce_gp_ucb() {
    let truth = vec![0.3, 1.0, -0.4];
    let p = line_problem(3, truth.clone());
    let mut s = settings(AcquisitionKind::SsUcb, 1, 12, 5);
    s.noise_variance = Some(0.01);
    let trace = run_sequential(&p, &s).unwrap();
    let centers = [1.0 / 6.0, 0.5, 5.0 / 6.0];
    let (c, sc) = p.standardization();
    let noise = 0.01 / (sc * sc);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (step, obs) in trace.observations.iter().enumerate() {
        let beta = 2.0 * (3.0 * ((step + 1) as f64).powi(2) * std::f64::consts::PI.powi(2) / (6.0 * 0.1)).ln();
        let ucb: Vec<f64> = centers
            .iter()
            .map(|&q| {
                let (m, v) = reference_posterior(&xs, &ys, noise, 0.3, q);
                m + beta.sqrt() * v.sqrt()
            })
            .collect();
        let best = ucb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let expected = ucb.iter().position(|&u| u >= best - 1e-9 * best.abs().max(1.0)).unwrap();
        assert_eq!(obs.x_index, expected, "step {step}: {ucb:?}");
        assert!((trace.rounds[step].beta - beta).abs() < 1e-12);
        xs.push(centers[obs.x_index]);
        ys.push((obs.y - c) / sc);
    }
}

#[test]
fn zero_budget_gives_empty_trace() {
    let p = line_problem(3, vec![0.0, 1.0, 2.0]);
    let trace = run_sequential(&p, &settings(AcquisitionKind::SsUcb, 1, 0, 1)).unwrap();
    assert!(trace.observations.is_empty());
    assert!(trace.rounds.is_empty());
    assert_eq!(trace.final_simple_regret(), None);
}

#[test]
fn constant_noiseless_objective_has_zero_regret() {
    let p = line_problem(4, vec![2.5; 4]);
    let mut s = settings(AcquisitionKind::SsUcb, 1, 6, 3);
    s.noise_variance = Some(0.0);
    let trace = run_sequential(&p, &s).unwrap();
    for o in &trace.observations {
        assert_eq!(o.y, 2.5);
        assert_eq!(o.inst_regret, 0.0);
        assert_eq!(o.simple_regret, 0.0);
    }
}

#[test]
fn batch_of_one_matches_sequential() {
    let p = small_grid_problem();
    let s = settings(AcquisitionKind::SsUcb, 1, 15, 11);
    let a = run_sequential(&p, &s).unwrap();
    let mut b = run_batch(&p, &s).unwrap();
    b.mode = Mode::Sequential;
    assert_eq!(a, b);
}

#[test]
fn two_rounds_of_two() {
    let p = small_grid_problem();
    let trace = run_batch(&p, &settings(AcquisitionKind::SsUcb, 2, 4, 2)).unwrap();
    assert_eq!(trace.observations.len(), 4);
    assert_eq!(trace.rounds.len(), 2);
    let rounds: Vec<usize> = trace.observations.iter().map(|o| o.round).collect();
    assert_eq!(rounds, vec![1, 1, 2, 2]);
    for o in &trace.observations {
        assert_eq!(o.theta_index, trace.rounds[o.round - 1].theta_index);
    }
}

#[test]
fn partial_last_batch() {
    let p = small_grid_problem();
    let trace = run_batch(&p, &settings(AcquisitionKind::SsUcb, 3, 7, 2)).unwrap();
    let sizes: Vec<usize> = trace.rounds.iter().map(|r| r.batch_size).collect();
    assert_eq!(sizes, vec![3, 3, 1]);
    assert_eq!(trace.observations.len(), 7);
}

#[test]
fn runs_are_deterministic() {
    let p = small_grid_problem();
    for kind in AcquisitionKind::ALL {
        let s = settings(kind, 3, 12, 99);
        assert_eq!(run_batch(&p, &s).unwrap(), run_batch(&p, &s).unwrap());
    }
    let mut other = settings(AcquisitionKind::Random, 1, 12, 99);
    let a = run_sequential(&p, &other).unwrap();
    other.replicate = 1;
    assert_ne!(a.x_indices(), run_sequential(&p, &other).unwrap().x_indices());
}

#[test]
fn first_round_picks_index_zero() {
    let p = small_grid_problem();
    let trace = run_sequential(&p, &settings(AcquisitionKind::SsUcb, 1, 1, 0)).unwrap();
    let r = &trace.rounds[0];
    assert_eq!(r.theta_index, 0);
    assert!((r.score_max - r.score_min).abs() < 1e-12);
}

#[test]
fn independent_selects_like_unpenalized_ss_ucb() {
    let p = small_grid_problem();
    let trace = run_batch(&p, &settings(AcquisitionKind::Independent, 5, 20, 4)).unwrap();
    let (c, sc) = p.standardization();
    let noise = p.default_noise_variance() / (sc * sc);
    for round in &trace.rounds {
        let obs: Vec<&ObservationRecord<f64>> = trace.observations.iter().filter(|o| o.round < round.round).collect();
        let xs: Vec<Vec<f64>> = obs.iter().map(|o| p.domain.points()[o.x_index].clone()).collect();
        let ys: Vec<f64> = obs.iter().map(|o| (o.y - c) / sc).collect();
        let m = GpModel::fit(p.kernel.clone(), noise, xs, ys).unwrap();
        let spec = AcquisitionSpec::new(AcquisitionKind::SsUcb);
        let t = obs.len() + 1;
        let scores = crate::acquisition::score_thetas(&spec, &m, p.domain.as_ref(), p.family.as_ref(), t).unwrap();
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(scores[round.theta_index] >= best - 1e-9 * best.abs().max(1.0), "round {}", round.round);
        assert!((round.score_max - 5.0 * best).abs() < 1e-9 * best.abs().max(1.0));
    }
}

#[test]
fn regrets_follow_their_definitions() {
    let p = small_grid_problem();
    let trace = run_batch(&p, &settings(AcquisitionKind::SsUcb, 5, 30, 8)).unwrap();
    let (x_star, f_star) = p.optimum();
    let mut best = f64::INFINITY;
    for o in &trace.observations {
        assert_eq!(o.f_true, p.truth[o.x_index]);
        assert_eq!(o.inst_regret, f_star - o.f_true);
        assert!(o.inst_regret >= 0.0);
        best = best.min(o.inst_regret);
        assert_eq!(o.simple_regret, best);
    }
    assert_eq!(trace.x_star, x_star);
}

#[test]
fn compute_regrets_hits_optimum() {
    let p = line_problem(3, vec![0.0, 1.0, 2.0]);
    let mut trace = run_sequential(&p, &settings(AcquisitionKind::Random, 1, 5, 1)).unwrap();
    let xs = [0, 1, 2, 0, 1];
    for (o, &x) in trace.observations.iter_mut().zip(&xs) {
        o.x_index = x;
        o.f_true = p.truth[x];
    }
    compute_regrets(&mut trace, 2, 2.0);
    assert_eq!(trace.instantaneous_regret(), vec![2.0, 1.0, 0.0, 2.0, 1.0]);
    assert_eq!(trace.simple_regret(), vec![2.0, 1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn rejects_bad_settings() {
    let p = line_problem(3, vec![0.0, 1.0, 2.0]);
    assert!(run_batch(&p, &settings(AcquisitionKind::SsUcb, 0, 5, 1)).is_err());
    let mut s = settings(AcquisitionKind::SsUcb, 1, 5, 1);
    s.noise_variance = Some(-1.0);
    assert!(run_sequential(&p, &s).is_err());
    s.noise_variance = None;
    s.acquisition.beta = BetaSchedule::Constant { value: -1.0 };
    assert!(run_sequential(&p, &s).is_err());
}

#[test]
fn sequence_problem_runs() {
    let spec = ProblemSpec::default_for(ObjectiveSpec::SeqLinearQuadratic { seed: 3 });
    let p = spec.build::<f64>().unwrap();
    assert_eq!(p.domain.len(), 1024);
    let trace = run_batch(&p, &settings(AcquisitionKind::SsUcb, 5, 10, 1)).unwrap();
    assert_eq!(trace.observations.len(), 10);
}

#[test]
fn f32_runs() {
    let spec = ProblemSpec {
        objective: ObjectiveSpec::Rastrigin,
        domain: DomainSpec::Grid { dim: 2, cells_per_dim: 8 },
        family: FamilySpec::Normal { means_per_dim: 4, std_fractions: vec![0.2, 0.01] },
        kernel: KernelChoice::SquaredExponential { lengthscale_fraction: 0.2, signal_variance: 1.0 },
    };
    let p = spec.build::<f32>().unwrap();
    let trace = run_batch(&p, &RunSettings { total_observations: 8, ..RunSettings::new(AcquisitionKind::SsUcb, 2, 0, 0) }).unwrap();
    assert_eq!(trace.observations.len(), 8);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn simple_regret_is_monotone(seed in 0u64..1000, batch in 1usize..4, k in 0usize..5) {
            let p = small_grid_problem();
            let kind = AcquisitionKind::ALL[k];
            let trace = run_batch(&p, &settings(kind, batch, 12, seed)).unwrap();
            let r = trace.simple_regret();
            prop_assert!(r.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(trace.instantaneous_regret().iter().all(|&v| v >= 0.0));
        }
    }
}

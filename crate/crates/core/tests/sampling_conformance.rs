//! Distributional checks of the samplers and reductions at pinned seeds.

use minitest::oracle::{binomial_pmf, poisson_cdf, poisson_pmf};
use minitest::sampling::{
    binomial_to_poisson_subsample, draw_observations, poisson_to_bernoulli_stream, poissonize_binomial,
    poissonize_multinomial, sample_null_or_alt, solve_c, solve_c_bar, trial_rng, Reduction, ReductionFailure,
};
use minitest::{ModelKind, RawSamples};

fn tv(xs: &[u64], pmf: impl Fn(u64) -> f64) -> f64 {
    let max = *xs.iter().max().unwrap() as usize;
    let mut freq = vec![0.0; max + 1];
    for &x in xs {
        freq[x as usize] += 1.0;
    }
    let m = xs.len() as f64;
    let mut d = 0.0;
    let mut seen = 0.0;
    for (k, f) in freq.iter().enumerate() {
        let pk = pmf(k as u64);
        d += (f / m - pk).abs();
        seen += pk;
    }
    0.5 * (d + (1.0 - seen).max(0.0))
}

#[test]
fn binomial_mean_at_one_half() {
    let mut rng = trial_rng(1, 0);
    let s = sample_null_or_alt(ModelKind::Binomial, &[0.5], 100_000, &mut rng).unwrap();
    let mean = s.histogram[0] as f64 / 1e5;
    assert!((mean - 0.5).abs() < 0.005, "{mean}");
    assert_eq!(s.s[0] + s.s_prime[0], s.histogram[0]);
}

#[test]
fn degenerate_parameters() {
    let mut rng = trial_rng(2, 0);
    let s = sample_null_or_alt(ModelKind::Poisson, &[0.0, 0.0], 50, &mut rng).unwrap();
    assert!(s.histogram.iter().all(|&h| h == 0));
    let s = sample_null_or_alt(ModelKind::Multinomial, &[1.0, 0.0], 51, &mut rng).unwrap();
    assert_eq!(s.histogram, vec![51, 0]);
    assert_eq!(s.s, vec![25, 0]);
    assert!(sample_null_or_alt(ModelKind::Multinomial, &[0.6, 0.6], 5, &mut rng).is_err());
    assert!(poissonize_multinomial(&[0.5, 0.5], 0, &mut rng).unwrap().iter().all(|&h| h == 0));
    assert!(poissonize_binomial(&[0.0, 0.0], 30, &mut rng).unwrap().iter().all(|&h| h == 0));
}

#[test]
fn half_sums_follow_the_model() {
    // S_j ~ Bin(k, q_j) with k = ⌊n/2⌋.
    let q = 0.3;
    let xs: Vec<u64> = (0..50_000)
        .map(|i| {
            let mut rng = trial_rng(3, i);
            sample_null_or_alt(ModelKind::Binomial, &[q], 21, &mut rng).unwrap().s[0]
        })
        .collect();
    assert!(tv(&xs, |x| binomial_pmf(10, q, x)) < 0.01);
}

#[test]
fn poissonized_marginals() {
    let xs: Vec<u64> = (0..100_000)
        .map(|i| poissonize_multinomial(&[1.0], 3, &mut trial_rng(4, i)).unwrap()[0])
        .collect();
    assert!(tv(&xs, |x| poisson_pmf(3.0, x)) < 0.01);
    let xs: Vec<u64> = (0..100_000)
        .map(|i| poissonize_binomial(&[0.3], 10, &mut trial_rng(5, i)).unwrap()[0])
        .collect();
    assert!(tv(&xs, |x| poisson_pmf(3.0, x)) < 0.01);
}

#[test]
fn poissonized_multinomial_coordinates_are_uncorrelated() {
    let draws: Vec<Vec<u64>> = (0..100_000)
        .map(|i| poissonize_multinomial(&[0.5, 0.5], 10, &mut trial_rng(6, i)).unwrap())
        .collect();
    let m = draws.len() as f64;
    let mean = |j: usize| draws.iter().map(|d| d[j] as f64).sum::<f64>() / m;
    let (m0, m1) = (mean(0), mean(1));
    let cov = draws.iter().map(|d| (d[0] as f64 - m0) * (d[1] as f64 - m1)).sum::<f64>() / m;
    let var = |j: usize, mj: f64| draws.iter().map(|d| (d[j] as f64 - mj).powi(2)).sum::<f64>() / m;
    let rho = cov / (var(0, m0) * var(1, m1)).sqrt();
    assert!(rho.abs() < 0.01, "{rho}");
}

#[test]
fn poisson_to_bernoulli_preserves_counts() {
    let y = vec![3, 0, 7];
    let mut rng = trial_rng(7, 0);
    let c = 1e-9;
    match poisson_to_bernoulli_stream(&y, 20, c, &mut rng).unwrap() {
        Reduction::Ok(rows) => assert!(rows.is_empty()),
        Reduction::Failed(f) => panic!("{f:?}"),
    }
    // With c = 1/2 the kept rows hold at most the original counts.
    let mut kept = 0;
    for i in 0..200 {
        if let Reduction::Ok(rows) = poisson_to_bernoulli_stream(&y, 20, 0.5, &mut trial_rng(7, i)).unwrap() {
            assert_eq!(rows.len(), 10);
            for (j, &yj) in y.iter().enumerate() {
                let col: u64 = rows.iter().map(|r| r[j] as u64).sum();
                assert!(col <= yj);
            }
            kept += 1;
        }
    }
    assert!(kept > 150);
}

#[test]
fn too_few_rows_matches_the_poisson_tail() {
    let n = 40;
    let c = 0.8;
    let required = (c * n as f64).floor() as u64;
    let trials = 40_000;
    let failures = (0..trials)
        .filter(|&i| {
            matches!(
                poisson_to_bernoulli_stream(&[0], n, c, &mut trial_rng(8, i)).unwrap(),
                Reduction::Failed(ReductionFailure::TooFewRows { .. })
            )
        })
        .count() as f64
        / trials as f64;
    let exact = poisson_cdf(n as f64, required - 1);
    let sd = (exact * (1.0 - exact) / trials as f64).sqrt();
    assert!((failures - exact).abs() < 3.0 * sd, "{failures} vs {exact}");
}

#[test]
fn count_beyond_rows_is_reported() {
    let mut rng = trial_rng(9, 0);
    match poisson_to_bernoulli_stream(&[1000], 5, 0.1, &mut rng).unwrap() {
        Reduction::Failed(ReductionFailure::CountExceedsRows { coordinate, count, .. }) => {
            assert_eq!((coordinate, count), (0, 1000));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn subsampled_totals_are_poisson() {
    let n = 60;
    let q = 0.2;
    let c_bar = 0.5;
    let xs: Vec<u64> = (0..30_000)
        .filter_map(|i| {
            let mut rng = trial_rng(10, i);
            let RawSamples::Bernoulli(rows) = draw_observations(ModelKind::Binomial, &[q], n, &mut rng).unwrap() else {
                unreachable!()
            };
            binomial_to_poisson_subsample(&rows, c_bar, &mut rng).unwrap().ok()
        })
        .map(|s| {
            assert_eq!(s.rows.iter().map(|r| r[0]).sum::<u64>(), s.totals[0]);
            s.totals[0]
        })
        .collect();
    assert!(xs.len() > 29_000);
    assert!(tv(&xs, |x| poisson_pmf(30.0 * q, x)) < 0.01);
}

#[test]
fn truncation_factors_meet_their_budget() {
    for &(n, eta) in &[(10u64, 0.1), (100, 0.2), (1000, 0.05)] {
        let c = solve_c(n, eta).unwrap();
        let m = (c * n as f64).round() as u64;
        assert!(m == 0 || poisson_cdf(n as f64, m - 1) <= eta / 4.0);
        assert!(poisson_cdf(n as f64, m) > eta / 4.0);
        let cb = solve_c_bar(n, eta).unwrap();
        let mb = (cb * n as f64).round() as u64;
        assert!(1.0 - poisson_cdf(mb as f64, n) <= eta / 4.0);
        assert!(cb <= 1.0);
    }
}

#[test]
fn replay_is_bit_identical() {
    let q = [0.2, 0.5, 0.01];
    for kind in [ModelKind::Binomial, ModelKind::Poisson] {
        let a = sample_null_or_alt(kind, &q, 333, &mut trial_rng(11, 4)).unwrap();
        let b = sample_null_or_alt(kind, &q, 333, &mut trial_rng(11, 4)).unwrap();
        assert_eq!(a, b);
    }
}

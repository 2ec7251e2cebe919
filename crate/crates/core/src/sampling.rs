//! Data generation under the three models and the Poissonization reductions.
//!
//! Samplers draw sufficient statistics directly (two half-sums and, for odd
//! `n`, one extra row) rather than materializing `n` observations, so a trial
//! costs `O(N)` draws regardless of `n`. Poisson and Binomial variates come
//! from `rand_distr`; streams are reproducible for a fixed seed but are not
//! meant to match other implementations draw for draw.

use rand::distr::weighted::WeightedIndex;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelKind, RawSamples, SampleSet};
use crate::oracle::poisson_cdf;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `i` under master seed `master`.
pub fn mix_seed(master: u64, i: u64) -> u64 {
    splitmix64(master ^ splitmix64(i))
}

/// Independent generator for trial `i`.
pub fn trial_rng(master: u64, i: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(master, i))
}

pub(crate) fn binomial<R: Rng + ?Sized>(trials: u64, p: f64, rng: &mut R) -> u64 {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    Binomial::new(trials, p)
        .expect("probability checked to lie in (0, 1)")
        .sample(rng)
}

pub(crate) fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let x: f64 = Poisson::new(lambda)
        .expect("rate checked to be positive and finite")
        .sample(rng);
    x as u64
}

/// Multinomial counts of `trials` draws from `q`, via conditional binomials.
/// `q` may sum to less than one only through rounding.
pub(crate) fn multinomial<R: Rng + ?Sized>(trials: u64, q: &[f64], out: &mut [u64], rng: &mut R) {
    let mut remaining = trials;
    let mut mass: f64 = q.iter().sum();
    for (j, &qj) in q.iter().enumerate() {
        if remaining == 0 {
            out[j] = 0;
            continue;
        }
        if j + 1 == q.len() {
            out[j] = remaining;
            break;
        }
        let prob = if mass > 0.0 { (qj / mass).clamp(0.0, 1.0) } else { 0.0 };
        let x = binomial(remaining, prob, rng);
        out[j] = x;
        remaining -= x;
        mass -= qj;
    }
}

fn check_q(kind: ModelKind, q: &[f64]) -> Result<()> {
    for (j, &v) in q.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidSpec(format!("q[{j}] = {v} is not a valid parameter")));
        }
        if kind == ModelKind::Binomial && v > 1.0 {
            return Err(Error::InvalidSpec(format!("binomial q[{j}] = {v} exceeds 1")));
        }
    }
    if kind == ModelKind::Multinomial {
        let s: f64 = q.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!("multinomial q sums to {s}")));
        }
    }
    Ok(())
}

/// Draws the sufficient statistics of `n` observations from `q`. Coordinates
/// keep the order of `q`: pass a canonical `q` to get a canonical sample.
pub fn sample_null_or_alt<R: Rng + ?Sized>(
    kind: ModelKind,
    q: &[f64],
    n: u64,
    rng: &mut R,
) -> Result<SampleSet> {
    check_q(kind, q)?;
    Ok(sample_unchecked(kind, q, n, rng))
}

pub(crate) fn sample_unchecked<R: Rng + ?Sized>(
    kind: ModelKind,
    q: &[f64],
    n: u64,
    rng: &mut R,
) -> SampleSet {
    let dim = q.len();
    let k = n / 2;
    let odd = n % 2 == 1;
    let mut out = SampleSet::zeros(n, dim);
    match kind {
        ModelKind::Binomial => {
            for (j, &qj) in q.iter().enumerate() {
                out.s[j] = binomial(k, qj, rng);
                out.s_prime[j] = binomial(k, qj, rng);
                let extra = if odd { binomial(1, qj, rng) } else { 0 };
                out.histogram[j] = out.s[j] + out.s_prime[j] + extra;
            }
        }
        ModelKind::Poisson => {
            for (j, &qj) in q.iter().enumerate() {
                out.s[j] = poisson(k as f64 * qj, rng);
                out.s_prime[j] = poisson(k as f64 * qj, rng);
                let extra = if odd { poisson(qj, rng) } else { 0 };
                out.histogram[j] = out.s[j] + out.s_prime[j] + extra;
            }
        }
        ModelKind::Multinomial => {
            multinomial(k, q, &mut out.s, rng);
            multinomial(k, q, &mut out.s_prime, rng);
            for j in 0..dim {
                out.histogram[j] = out.s[j] + out.s_prime[j];
            }
            if odd {
                let mut extra = vec![0u64; dim];
                multinomial(1, q, &mut extra, rng);
                for (h, e) in out.histogram.iter_mut().zip(&extra) {
                    *h += e;
                }
            }
        }
    }
    out
}

/// Draws `n` raw observations from `q` (original coordinate order).
pub fn draw_observations<R: Rng + ?Sized>(
    kind: ModelKind,
    q: &[f64],
    n: u64,
    rng: &mut R,
) -> Result<RawSamples> {
    check_q(kind, q)?;
    let n = n as usize;
    Ok(match kind {
        ModelKind::Binomial => RawSamples::Bernoulli(
            (0..n)
                .map(|_| q.iter().map(|&qj| binomial(1, qj, rng) as u8).collect())
                .collect(),
        ),
        ModelKind::Poisson => RawSamples::Counts(
            (0..n)
                .map(|_| q.iter().map(|&qj| poisson(qj, rng)).collect())
                .collect(),
        ),
        ModelKind::Multinomial => {
            let w = WeightedIndex::new(q)
                .map_err(|e| Error::InvalidSpec(format!("multinomial weights: {e}")))?;
            RawSamples::Categories((0..n).map(|_| w.sample(rng)).collect())
        }
    })
}

/// Histogram of `ñ ~ Poi(n)` categorical draws from `q`.
pub fn poissonize_multinomial<R: Rng + ?Sized>(q: &[f64], n: u64, rng: &mut R) -> Result<Vec<u64>> {
    check_q(ModelKind::Multinomial, q)?;
    let n_tilde = poisson(n as f64, rng);
    let mut h = vec![0u64; q.len()];
    multinomial(n_tilde, q, &mut h, rng);
    Ok(h)
}

/// `Σ_{i≤ñ} X_i` for `ñ ~ Poi(n)` Bernoulli vectors with parameter `p`.
pub fn poissonize_binomial<R: Rng + ?Sized>(p: &[f64], n: u64, rng: &mut R) -> Result<Vec<u64>> {
    check_q(ModelKind::Binomial, p)?;
    let n_tilde = poisson(n as f64, rng);
    Ok(p.iter().map(|&pj| binomial(n_tilde, pj, rng)).collect())
}

/// Why a reduction could not produce its output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ReductionFailure {
    /// `ñ < ⌊cn⌋`: too few Bernoulli rows to truncate to.
    TooFewRows { n_tilde: u64, required: u64 },
    /// A Poisson count exceeds `ñ` and cannot be spread over distinct rows.
    CountExceedsRows { coordinate: usize, count: u64, n_tilde: u64 },
    /// `ñ > n`: not enough input rows to subsample from.
    TooManyRows { n_tilde: u64, available: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction<T> {
    Ok(T),
    Failed(ReductionFailure),
}

impl<T> Reduction<T> {
    pub fn ok(self) -> Option<T> {
        match self {
            Reduction::Ok(v) => Some(v),
            Reduction::Failed(_) => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Reduction::Ok(_))
    }
}

/// Spreads Poisson counts `y` over `ñ ~ Poi(n)` Bernoulli rows, each
/// coordinate's ones at uniformly chosen distinct rows, then keeps the first
/// `⌊cn⌋` rows.
pub fn poisson_to_bernoulli_stream<R: Rng + ?Sized>(
    y: &[u64],
    n: u64,
    c: f64,
    rng: &mut R,
) -> Result<Reduction<Vec<Vec<u8>>>> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::OutOfRange(format!("truncation factor c = {c} must be positive")));
    }
    let required = (c * n as f64).floor() as u64;
    let n_tilde = poisson(n as f64, rng);
    if n_tilde < required {
        return Ok(Reduction::Failed(ReductionFailure::TooFewRows { n_tilde, required }));
    }
    if let Some((coordinate, &count)) = y.iter().enumerate().find(|(_, &v)| v > n_tilde) {
        return Ok(Reduction::Failed(ReductionFailure::CountExceedsRows {
            coordinate,
            count,
            n_tilde,
        }));
    }
    let mut rows = vec![vec![0u8; y.len()]; required as usize];
    for (j, &count) in y.iter().enumerate() {
        if count == 0 {
            continue;
        }
        for r in index::sample(rng, n_tilde as usize, count as usize) {
            if r < required as usize {
                rows[r][j] = 1;
            }
        }
    }
    Ok(Reduction::Ok(rows))
}

/// Poisson rows obtained from Bernoulli rows by subsampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonSubsample {
    /// `⌊c̄ n⌋`, the Poisson mean multiplier of `totals`.
    pub m: u64,
    pub n_tilde: u64,
    /// `Σ_{i≤ñ} X_i`; coordinate `j` is `Poi(m q_j)`.
    pub totals: Vec<u64>,
    /// `totals` spread uniformly over `m` rows, each row `Poi(q)`.
    pub rows: Vec<Vec<u64>>,
}

/// Sums the first `ñ ~ Poi(⌊c̄ n⌋)` of the `n` rows.
pub fn binomial_to_poisson_subsample<R: Rng + ?Sized>(
    rows: &[Vec<u8>],
    c_bar: f64,
    rng: &mut R,
) -> Result<Reduction<PoissonSubsample>> {
    if !(c_bar > 0.0 && c_bar <= 1.0) {
        return Err(Error::OutOfRange(format!("c̄ = {c_bar} must lie in (0, 1]")));
    }
    let n = rows.len() as u64;
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Parse("rows have different lengths".into()));
    }
    let m = (c_bar * n as f64).floor() as u64;
    let n_tilde = poisson(m as f64, rng);
    if n_tilde > n {
        return Ok(Reduction::Failed(ReductionFailure::TooManyRows {
            n_tilde,
            available: n,
        }));
    }
    let mut totals = vec![0u64; dim];
    for r in &rows[..n_tilde as usize] {
        for (j, &v) in r.iter().enumerate() {
            totals[j] += v as u64;
        }
    }
    let mut out_rows = vec![vec![0u64; dim]; m as usize];
    if m > 0 {
        let uniform = vec![1.0 / m as f64; m as usize];
        let mut split = vec![0u64; m as usize];
        for (j, &tot) in totals.iter().enumerate() {
            multinomial(tot, &uniform, &mut split, rng);
            for (row, &v) in out_rows.iter_mut().zip(&split) {
                row[j] = v;
            }
        }
    }
    Ok(Reduction::Ok(PoissonSubsample {
        m,
        n_tilde,
        totals,
        rows: out_rows,
    }))
}

/// Largest `c = m/n` with `P(Poi(n) < m) ≤ η/4`.
pub fn solve_c(n: u64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    if n == 0 {
        return Err(Error::TooFewSamples(0));
    }
    let budget = eta / 4.0;
    // P(Poi(n) ≤ m − 1) is increasing in m; find the last m within budget.
    let (mut lo, mut hi) = (0u64, n);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if poisson_cdf(n as f64, mid - 1) <= budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(lo as f64 / n as f64)
}

/// Largest `c̄ = m/n ≤ 1` with `P(Poi(m) > n) ≤ η/4`.
pub fn solve_c_bar(n: u64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    if n == 0 {
        return Err(Error::TooFewSamples(0));
    }
    let budget = eta / 4.0;
    let (mut lo, mut hi) = (0u64, n);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if 1.0 - poisson_cdf(mid as f64, n) <= budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(lo as f64 / n as f64)
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidSpec(format!("eta must lie in (0, 1), got {eta}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_give_zero_counts() {
        let mut rng = trial_rng(1, 0);
        for kind in [ModelKind::Binomial, ModelKind::Poisson] {
            let s = sample_null_or_alt(kind, &[0.0; 4], 9, &mut rng).unwrap();
            assert!(s.histogram.iter().all(|&h| h == 0));
        }
        assert_eq!(poissonize_binomial(&[0.0; 3], 50, &mut rng).unwrap(), vec![0; 3]);
        assert_eq!(poissonize_multinomial(&[0.5, 0.5], 0, &mut rng).unwrap(), vec![0, 0]);
    }

    #[test]
    fn dirac_multinomial() {
        let mut rng = trial_rng(2, 0);
        let s = sample_null_or_alt(ModelKind::Multinomial, &[1.0, 0.0], 31, &mut rng).unwrap();
        assert_eq!(s.histogram, vec![31, 0]);
        assert_eq!(s.s, vec![15, 0]);
        assert_eq!(s.s_prime, vec![15, 0]);
        let raw = draw_observations(ModelKind::Multinomial, &[1.0, 0.0], 5, &mut rng).unwrap();
        assert_eq!(raw, RawSamples::Categories(vec![0; 5]));
    }

    #[test]
    fn sample_set_invariants() {
        let mut rng = trial_rng(3, 0);
        for kind in [ModelKind::Binomial, ModelKind::Poisson, ModelKind::Multinomial] {
            let q = [0.4, 0.35, 0.25];
            for n in [2u64, 7, 40] {
                let s = sample_null_or_alt(kind, &q, n, &mut rng).unwrap();
                assert_eq!(s.k, n / 2);
                for j in 0..3 {
                    assert!(s.s[j] + s.s_prime[j] <= s.histogram[j]);
                    if kind != ModelKind::Poisson {
                        assert!(s.histogram[j] <= n);
                        assert!(s.s[j] <= s.k && s.s_prime[j] <= s.k);
                    }
                }
                if kind == ModelKind::Multinomial {
                    assert_eq!(s.histogram.iter().sum::<u64>(), n);
                }
            }
        }
    }

    #[test]
    fn binomial_mean_matches() {
        let mut rng = trial_rng(4, 0);
        let s = sample_null_or_alt(ModelKind::Binomial, &[0.5], 100_000, &mut rng).unwrap();
        let m = s.histogram[0] as f64 / 1e5;
        assert!((m - 0.5).abs() < 0.005);
    }

    #[test]
    fn replay_is_bitwise() {
        let q = [0.2, 0.3, 0.5];
        for kind in [ModelKind::Binomial, ModelKind::Poisson, ModelKind::Multinomial] {
            let a = sample_null_or_alt(kind, &q, 101, &mut trial_rng(9, 17)).unwrap();
            let b = sample_null_or_alt(kind, &q, 101, &mut trial_rng(9, 17)).unwrap();
            assert_eq!(a, b);
        }
        assert_ne!(mix_seed(1, 2), mix_seed(2, 1));
        assert_ne!(mix_seed(0, 0), mix_seed(0, 1));
    }

    #[test]
    fn invalid_q_rejected() {
        let mut rng = trial_rng(5, 0);
        assert!(sample_null_or_alt(ModelKind::Binomial, &[1.5], 4, &mut rng).is_err());
        assert!(sample_null_or_alt(ModelKind::Poisson, &[-0.1], 4, &mut rng).is_err());
        assert!(sample_null_or_alt(ModelKind::Multinomial, &[0.3, 0.3], 4, &mut rng).is_err());
    }

    #[test]
    fn bernoulli_stream_places_counts_on_distinct_rows() {
        let mut rng = trial_rng(6, 0);
        let y = [3u64, 0, 1];
        let mut hits = 0;
        for _ in 0..50 {
            match poisson_to_bernoulli_stream(&y, 40, 0.5, &mut rng).unwrap() {
                Reduction::Ok(rows) => {
                    assert_eq!(rows.len(), 20);
                    assert!(rows.iter().all(|r| r.len() == 3 && r[1] == 0));
                    let c0: u64 = rows.iter().map(|r| r[0] as u64).sum();
                    assert!(c0 <= 3);
                    hits += 1;
                }
                Reduction::Failed(f) => panic!("unexpected {f:?}"),
            }
        }
        assert_eq!(hits, 50);
        let zero = poisson_to_bernoulli_stream(&[0, 0], 10, 0.1, &mut rng).unwrap();
        if let Reduction::Ok(rows) = zero {
            assert!(rows.iter().flatten().all(|&v| v == 0));
        }
        match poisson_to_bernoulli_stream(&[1000], 5, 0.01, &mut rng).unwrap() {
            Reduction::Failed(ReductionFailure::CountExceedsRows { coordinate: 0, .. }) => {}
            other => panic!("expected count failure, got {other:?}"),
        }
        match poisson_to_bernoulli_stream(&[0], 10, 50.0, &mut rng).unwrap() {
            Reduction::Failed(ReductionFailure::TooFewRows { required: 500, .. }) => {}
            other => panic!("expected row failure, got {other:?}"),
        }
    }

    #[test]
    fn subsample_sums_rows() {
        let mut rng = trial_rng(7, 0);
        let rows: Vec<Vec<u8>> = (0..200).map(|i| vec![(i % 2) as u8, 1]).collect();
        let r = binomial_to_poisson_subsample(&rows, 0.5, &mut rng).unwrap().ok().unwrap();
        assert_eq!(r.m, 100);
        assert_eq!(r.totals[1], r.n_tilde);
        assert_eq!(r.rows.len(), 100);
        let col: u64 = r.rows.iter().map(|x| x[0]).sum();
        assert_eq!(col, r.totals[0]);
        let small: Vec<Vec<u8>> = vec![vec![1]; 3];
        let mut failures = 0;
        for _ in 0..200 {
            if !binomial_to_poisson_subsample(&small, 1.0, &mut rng).unwrap().is_ok() {
                failures += 1;
            }
        }
        // P(Poi(3) > 3) ≈ 0.353.
        assert!((failures as f64 / 200.0 - 0.353).abs() < 0.12);
    }

    #[test]
    fn c_solutions_meet_budget() {
        for (n, eta) in [(100u64, 0.1), (1000, 0.2), (37, 0.5)] {
            let c = solve_c(n, eta).unwrap();
            let m = (c * n as f64).round() as u64;
            assert!(m == 0 || poisson_cdf(n as f64, m - 1) <= eta / 4.0);
            assert!(poisson_cdf(n as f64, m) > eta / 4.0);
            let cb = solve_c_bar(n, eta).unwrap();
            let mb = (cb * n as f64).round() as u64;
            assert!(1.0 - poisson_cdf(mb as f64, n) <= eta / 4.0);
            assert!(mb == n || 1.0 - poisson_cdf((mb + 1) as f64, n) > eta / 4.0);
            assert!(c < 1.0 && cb < 1.0);
        }
    }
}

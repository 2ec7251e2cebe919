//! Exact small-instance computations used as ground truth.
//!
//! Everything here enumerates outcome spaces outright, weights them by exact
//! pmfs and sums with compensated accumulation. Sizes are capped; asking for
//! more returns [`Error::EnumerationTooLarge`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;
use statrs::function::gamma::ln_gamma;

use crate::adversary::{Adversary, chi2_cosh_bound, chi2_divergence_closed_form, holder_saturating_gamma};
use crate::error::{Error, Result};
use crate::model::{ConstantLedger, ModelKind, NullSpec};
use crate::rates::exponents;
use crate::statistics::{moments_t1, moments_t2, moments_t_bulk, Moments};

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

fn csum(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().collect::<CompensatedSum>().value()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum PmfLaw {
    Binomial { n: u64, p: f64 },
    Poisson { lambda: f64 },
}

/// Log-space pmf; no factorials are formed.
pub fn exact_pmf(law: PmfLaw, x: u64) -> f64 {
    match law {
        PmfLaw::Binomial { n, p } => binomial_pmf(n, p, x),
        PmfLaw::Poisson { lambda } => poisson_pmf(lambda, x),
    }
}

pub fn binomial_pmf(n: u64, p: f64, x: u64) -> f64 {
    if x > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if x == n { 1.0 } else { 0.0 };
    }
    let xf = x as f64;
    let ln = ln_binomial(n, x) + xf * p.ln() + (n - x) as f64 * (-p).ln_1p();
    ln.exp()
}

pub fn poisson_pmf(lambda: f64, x: u64) -> f64 {
    if lambda <= 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    let xf = x as f64;
    (xf * lambda.ln() - lambda - ln_gamma(xf + 1.0)).exp()
}

fn poisson_window(lambda: f64) -> (u64, u64) {
    let spread = 40.0 * lambda.sqrt() + 60.0;
    let lo = (lambda - spread).max(0.0).floor() as u64;
    let hi = (lambda + spread).ceil() as u64;
    (lo, hi)
}

/// `P(Poi(λ) ≤ m)`, summing whichever side of the mean is shorter. Terms
/// beyond forty standard deviations are below double precision and skipped.
pub fn poisson_cdf(lambda: f64, m: u64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let (lo, hi) = poisson_window(lambda);
    if m >= hi {
        return 1.0;
    }
    if (m as f64) < lambda {
        if m < lo {
            return 0.0;
        }
        csum((lo..=m).map(|x| poisson_pmf(lambda, x))).min(1.0)
    } else {
        let upper = csum((m + 1..=hi).map(|x| poisson_pmf(lambda, x)));
        (1.0 - upper).clamp(0.0, 1.0)
    }
}

/// Smallest `M` with `P(Poi(λ) > M) < 1e-18`.
fn poisson_truncation(lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let mut m = lambda.ceil() as u64;
    let mut tail = 1.0 - poisson_cdf(lambda, m);
    while tail >= 1e-18 {
        m += 1;
        tail = csum((m + 1..m + 200).map(|x| poisson_pmf(lambda, x)));
    }
    m
}

/// Hard cap on the number of enumerated outcomes of one law.
pub const OUTCOME_CAP: usize = 2_000_000;
/// Hard cap on outcome pairs enumerated jointly.
pub const PAIR_CAP: usize = 4_000_000;

/// The exact law of the counts of `m` observations on the listed
/// coordinates, as `(counts, probability)` pairs. A multinomial law lumps the
/// unlisted categories into one remainder category.
pub fn count_law(kind: ModelKind, q: &[f64], m: u64) -> Result<Vec<(Vec<u64>, f64)>> {
    match kind {
        ModelKind::Binomial | ModelKind::Poisson => {
            let marginals: Vec<Vec<f64>> = q
                .iter()
                .map(|&qj| match kind {
                    ModelKind::Binomial => (0..=m).map(|x| binomial_pmf(m, qj, x)).collect(),
                    _ => {
                        let lambda = m as f64 * qj;
                        (0..=poisson_truncation(lambda))
                            .map(|x| poisson_pmf(lambda, x))
                            .collect()
                    }
                })
                .collect();
            let size = marginals
                .iter()
                .try_fold(1usize, |acc, v| acc.checked_mul(v.len()))
                .filter(|&s| s <= OUTCOME_CAP)
                .ok_or_else(|| {
                    Error::EnumerationTooLarge(format!(
                        "{} coordinates with {m} observations exceed {OUTCOME_CAP} outcomes",
                        q.len()
                    ))
                })?;
            let mut out = Vec::with_capacity(size);
            let mut idx = vec![0usize; q.len()];
            loop {
                let prob = idx.iter().zip(&marginals).map(|(&i, v)| v[i]).product::<f64>();
                out.push((idx.iter().map(|&i| i as u64).collect(), prob));
                let mut pos = 0;
                loop {
                    if pos == idx.len() {
                        return Ok(out);
                    }
                    idx[pos] += 1;
                    if idx[pos] < marginals[pos].len() {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
            }
        }
        ModelKind::Multinomial => {
            let rest = (1.0 - q.iter().sum::<f64>()).max(0.0);
            let parts = q.len() + 1;
            let size = ln_binomial(m + parts as u64 - 1, parts as u64 - 1).exp();
            if size > OUTCOME_CAP as f64 {
                return Err(Error::EnumerationTooLarge(format!(
                    "compositions of {m} into {parts} parts exceed {OUTCOME_CAP}"
                )));
            }
            let mut probs = q.to_vec();
            probs.push(rest);
            let mut out = Vec::new();
            let mut cur = vec![0u64; parts];
            compositions(m, 0, &mut cur, &mut |c| {
                let mut ln = ln_gamma(m as f64 + 1.0);
                for (&x, &pr) in c.iter().zip(&probs) {
                    if x > 0 {
                        if pr <= 0.0 {
                            return;
                        }
                        ln += x as f64 * pr.ln();
                    }
                    ln -= ln_gamma(x as f64 + 1.0);
                }
                out.push((c[..parts - 1].to_vec(), ln.exp()));
            });
            Ok(out)
        }
    }
}

fn compositions(m: u64, pos: usize, cur: &mut Vec<u64>, f: &mut impl FnMut(&[u64])) {
    if pos + 1 == cur.len() {
        cur[pos] = m;
        f(cur);
        return;
    }
    for x in 0..=m {
        cur[pos] = x;
        compositions(m - x, pos + 1, cur, f);
    }
}

/// Statistic whose distribution is enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "statistic", rename_all = "snake_case")]
pub enum StatisticKind {
    /// `Σ_{i<a} p_i^{−b} (S_i/k − p_i)(S′_i/k − p_i)`.
    TBulk { a: usize, b: f64 },
    /// `Σ_{i≥a} (S_i/k − p_i)(S′_i/k − p_i)`.
    T2 { a: usize },
    /// `Σ_{i≥a} N_i/n − p_i`.
    T1 { a: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub mean: f64,
    pub variance: f64,
    pub outcomes: usize,
}

/// Exact mean and variance of a statistic by enumeration. `size` is the
/// half-sample size `k` for the split statistics and `n` for `T₁`.
pub fn enumerate_statistic_moments(
    kind: ModelKind,
    p: &[f64],
    q: &[f64],
    size: u64,
    statistic: StatisticKind,
) -> Result<ExactMoments> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    if size == 0 {
        return Err(Error::TooFewSamples(0));
    }
    match statistic {
        StatisticKind::T1 { a } => {
            let a = a.min(p.len());
            let law = if kind == ModelKind::Multinomial {
                // The tail counts depend on the head through the total.
                count_law(kind, q, size)?
            } else {
                count_law(kind, &q[a..], size)?
            };
            let off = if kind == ModelKind::Multinomial { a } else { 0 };
            let nf = size as f64;
            let value = |c: &[u64]| csum((a..p.len()).map(|i| c[i - a + off] as f64 / nf - p[i]));
            let mean = csum(law.iter().map(|(c, pr)| pr * value(c)));
            let var = csum(law.iter().map(|(c, pr)| pr * (value(c) - mean).powi(2)));
            Ok(ExactMoments {
                mean,
                variance: var,
                outcomes: law.len(),
            })
        }
        StatisticKind::TBulk { .. } | StatisticKind::T2 { .. } => {
            let (idx, w): (Vec<usize>, Vec<f64>) = match statistic {
                StatisticKind::TBulk { a, b } => (0..a.min(p.len())).map(|i| (i, p[i].powf(-b))).unzip(),
                StatisticKind::T2 { a } => (a.min(p.len())..p.len()).map(|i| (i, 1.0)).unzip(),
                StatisticKind::T1 { .. } => unreachable!(),
            };
            let law = count_law(kind, q, size)?;
            let kf = size as f64;
            // Centered half-sums for each outcome of one half.
            let centered: Vec<Vec<f64>> = law
                .iter()
                .map(|(c, _)| idx.iter().map(|&i| c[i] as f64 / kf - p[i]).collect())
                .collect();
            if law.len().saturating_mul(law.len()) <= PAIR_CAP {
                let stat = |x: &[f64], y: &[f64]| csum((0..w.len()).map(|j| w[j] * x[j] * y[j]));
                let mut m1 = CompensatedSum::default();
                for (x, (_, px)) in centered.iter().zip(&law) {
                    for (y, (_, py)) in centered.iter().zip(&law) {
                        m1.add(px * py * stat(x, y));
                    }
                }
                let mean = m1.value();
                let mut v = CompensatedSum::default();
                for (x, (_, px)) in centered.iter().zip(&law) {
                    for (y, (_, py)) in centered.iter().zip(&law) {
                        v.add(px * py * (stat(x, y) - mean).powi(2));
                    }
                }
                Ok(ExactMoments {
                    mean,
                    variance: v.value(),
                    outcomes: law.len() * law.len(),
                })
            } else {
                // The halves are independent: E[T²] = Σ_ij w_i w_j M_ij²
                // with M the enumerated second-moment matrix of one half.
                let d = idx.len();
                let first: Vec<f64> = (0..d)
                    .map(|i| csum(law.iter().zip(&centered).map(|((_, pr), x)| pr * x[i])))
                    .collect();
                let mut second = vec![vec![0.0; d]; d];
                for (i, row) in second.iter_mut().enumerate() {
                    for (j, cell) in row.iter_mut().enumerate() {
                        *cell = csum(law.iter().zip(&centered).map(|((_, pr), x)| pr * x[i] * x[j]));
                    }
                }
                let mean = csum((0..d).map(|i| w[i] * first[i] * first[i]));
                let m2 = csum((0..d).flat_map(|i| {
                    let (w, second) = (&w, &second);
                    (0..d).map(move |j| w[i] * w[j] * second[i][j] * second[i][j])
                }));
                Ok(ExactMoments {
                    mean,
                    variance: m2 - mean * mean,
                    outcomes: law.len(),
                })
            }
        }
    }
}

/// χ² divergence between the Rademacher mixture `q_δ = p + δ ∘ γ` and `p`
/// for `n` Bernoulli-vector observations, by enumeration over histograms and
/// all sign patterns.
pub fn exact_mixture_chi2(p: &[f64], gamma: &[f64], n: u64) -> Result<f64> {
    if p.len() != gamma.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: gamma.len(),
        });
    }
    if p.len() > 2 || n > 4 {
        return Err(Error::EnumerationTooLarge(format!(
            "mixture χ² enumeration is limited to N ≤ 2 and n ≤ 4, got N = {}, n = {n}",
            p.len()
        )));
    }
    for (i, (&pi, &gi)) in p.iter().zip(gamma).enumerate() {
        if gi < 0.0 || pi - gi < 0.0 || pi + gi > 1.0 {
            return Err(Error::Infeasible(format!(
                "p[{i}] ± γ[{i}] leaves [0, 1]"
            )));
        }
    }
    let dim = p.len();
    let signs = 1usize << dim;
    let null = count_law(ModelKind::Binomial, p, n)?;
    let mut acc = CompensatedSum::default();
    for (h, p0) in &null {
        let mut mix = CompensatedSum::default();
        for mask in 0..signs {
            let prob: f64 = (0..dim)
                .map(|i| {
                    let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                    binomial_pmf(n, p[i] + s * gamma[i], h[i])
                })
                .product();
            mix.add(prob / signs as f64);
        }
        let m = mix.value();
        if *p0 == 0.0 {
            if m > 0.0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        acc.add(m * m / p0);
    }
    Ok(acc.value() - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPriorTv {
    pub tv: f64,
    /// `Σ_{i≥U} P(N_i ≥ 2)` under the null.
    pub collision_mass_null: f64,
    /// The same under the mixture.
    pub collision_mass_mixture: f64,
}

/// Total variation between the null and the sparse tail mixture on
/// coordinates `U..=N` (1-based) of `p`, for `n` Bernoulli-vector
/// observations. Coordinates before `U` agree under both and are skipped.
pub fn exact_tv_tail_prior(p: &[f64], u: usize, pi_bar: f64, n: u64) -> Result<TailPriorTv> {
    if u == 0 || u > p.len() + 1 {
        return Err(Error::OutOfRange(format!("U = {u} outside 1..={}", p.len() + 1)));
    }
    let tail = &p[u - 1..];
    if tail.len() > 2 || n > 4 {
        return Err(Error::EnumerationTooLarge(format!(
            "tail TV enumeration is limited to two tail coordinates and n ≤ 4, got {} and n = {n}",
            tail.len()
        )));
    }
    if !(pi_bar > 0.0 && pi_bar <= 1.0) {
        return Err(Error::OutOfRange(format!("π̄ = {pi_bar} outside (0, 1]")));
    }
    let pis: Vec<f64> = tail.iter().map(|&x| x / pi_bar).collect();
    if pis.iter().any(|&x| x > 1.0) {
        return Err(Error::Infeasible("some π_i exceeds one".into()));
    }
    let null = count_law(ModelKind::Binomial, tail, n)?;
    let mixture_pmf = |i: usize, h: u64| {
        let point = if h == 0 { 1.0 - pis[i] } else { 0.0 };
        point + pis[i] * binomial_pmf(n, pi_bar, h)
    };
    let tv = 0.5
        * csum(null.iter().map(|(h, p0)| {
            let m: f64 = h.iter().enumerate().map(|(i, &x)| mixture_pmf(i, x)).product();
            (p0 - m).abs()
        }));
    let coll = |f: &dyn Fn(usize, u64) -> f64| {
        csum((0..tail.len()).map(|i| 1.0 - f(i, 0) - f(i, 1)))
    };
    let null_pmf = |i: usize, h: u64| binomial_pmf(n, tail[i], h);
    Ok(TailPriorTv {
        tv,
        collision_mass_null: coll(&null_pmf),
        collision_mass_mixture: coll(&mixture_pmf),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    /// Largest discrepancy (or largest violation ratio) observed.
    pub worst: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
    pub all_passed: bool,
}

/// Random `(p, q)` pair with `N` coordinates valid for `kind`.
pub fn random_pair<R: Rng + ?Sized>(kind: ModelKind, dim: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let mut draw = |lo: f64| -> Vec<f64> { (0..dim).map(|_| rng.random_range(lo..1.0)).collect() };
    let mut p = draw(0.02);
    let mut q = draw(0.0);
    if kind == ModelKind::Multinomial {
        // Leave mass for the remainder category.
        let sp = p.iter().sum::<f64>() * 1.25;
        let sq = q.iter().sum::<f64>() * 1.25 + 1e-9;
        p.iter_mut().for_each(|x| *x /= sp);
        q.iter_mut().for_each(|x| *x /= sq);
    } else if kind == ModelKind::Poisson {
        p.iter_mut().for_each(|x| *x *= 0.8);
        q.iter_mut().for_each(|x| *x *= 0.8);
    }
    (p, q)
}

/// Moments cross-check: enumeration against the closed forms.
pub fn check_moments(seed: u64, pairs: usize) -> Result<OracleCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_mean: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    let mut bound_ok = true;
    let mut cases = 0;
    for kind in [ModelKind::Binomial, ModelKind::Poisson, ModelKind::Multinomial] {
        for dim in 1..=3usize {
            for k in 1..=4u64 {
                for &t in &[1.0, 1.5, 2.0] {
                    let b = exponents(t)?.1;
                    for _ in 0..pairs {
                        let (p, q) = random_pair(kind, dim, &mut rng);
                        let a = rng.random_range(0..=dim);
                        let checks: [(Moments, StatisticKind, u64); 3] = [
                            (moments_t_bulk(kind, &p, &q, a, b, k)?, StatisticKind::TBulk { a, b }, k),
                            (moments_t2(kind, &p, &q, a, k)?, StatisticKind::T2 { a }, k),
                            (moments_t1(kind, &p, &q, a, 2 * k)?, StatisticKind::T1 { a }, 2 * k),
                        ];
                        for (closed, stat, size) in checks {
                            let ex = enumerate_statistic_moments(kind, &p, &q, size, stat)?;
                            worst_mean = worst_mean.max((ex.mean - closed.mean).abs());
                            worst_var = worst_var.max((ex.variance - closed.variance_exact).abs());
                            if closed.variance_upper < ex.variance * (1.0 - 1e-12) - 1e-15 {
                                bound_ok = false;
                            }
                            cases += 1;
                        }
                    }
                }
            }
        }
    }
    let passed = worst_mean <= 1e-12 && worst_var <= 1e-12 && bound_ok;
    Ok(OracleCheck {
        name: "moments".into(),
        passed,
        cases,
        worst: worst_mean.max(worst_var),
        detail: format!(
            "max |mean error| = {worst_mean:.3e}, max |variance error| = {worst_var:.3e}, variance bounds dominate: {bound_ok}"
        ),
    })
}

/// Closed-form mixture χ² against enumeration, on random feasible γ.
pub fn check_chi2_closed_form(seed: u64, cases: usize) -> Result<OracleCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for c in 0..cases {
        let dim = 1 + c % 2;
        let n = 1 + (c / 2 % 4) as u64;
        let p: Vec<f64> = (0..dim).map(|_| rng.random_range(0.02..0.98)).collect();
        let gamma: Vec<f64> = p
            .iter()
            .map(|&x| rng.random_range(0.0..=1.0) * x.min(1.0 - x))
            .collect();
        let closed = chi2_divergence_closed_form(&p, &gamma, n)?;
        let exact = exact_mixture_chi2(&p, &gamma, n)?;
        worst = worst.max((closed - exact).abs());
    }
    Ok(OracleCheck {
        name: "chi2_closed_form".into(),
        passed: worst <= 1e-12,
        cases,
        worst,
        detail: format!("max |closed − enumerated| = {worst:.3e}"),
    })
}

/// The default bulk perturbation has χ² certificate at most `4(1−η)²`, and
/// the cosh bound dominates the product.
pub fn check_certificate(etas: &[f64]) -> Result<OracleCheck> {
    let mut worst_ratio: f64 = 0.0;
    let mut cosh_ok = true;
    let mut cases = 0;
    let shapes: Vec<Vec<f64>> = vec![
        vec![0.5; 8],
        vec![0.5, 0.4, 0.3, 0.2, 0.1],
        (1..=40).map(|i| 0.5 / i as f64).collect(),
        (0..30).map(|i| 0.5 * 0.8f64.powi(i)).collect(),
    ];
    for &eta in etas {
        let ledger = ConstantLedger::defaults(eta);
        for p in &shapes {
            for &n in &[5u64, 50, 500, 5000] {
                for &t in &[1.0, 1.5, 2.0] {
                    let spec = NullSpec::with_constants(ModelKind::Binomial, p.clone(), eta, t, ledger)?;
                    let adv = Adversary::new(&spec, n)?;
                    let a = adv.profile().a;
                    if a == 0 {
                        continue;
                    }
                    let gamma = adv.bulk_perturbation(1.0)?;
                    let p = &adv.canonical().effective()[..a];
                    let chi2 = chi2_divergence_closed_form(p, &gamma, n)?;
                    let bound = 4.0 * (1.0 - eta) * (1.0 - eta);
                    worst_ratio = worst_ratio.max(chi2 / bound);
                    if chi2 > chi2_cosh_bound(p, &gamma, n)? * (1.0 + 1e-12) {
                        cosh_ok = false;
                    }
                    cases += 1;
                }
            }
        }
        // The Hölder-saturating direction at the same budget.
        let p = vec![0.3, 0.2, 0.1];
        let h = holder_saturating_gamma(&p, 40, ledger.c_a4 / 2.0, 1.0)?;
        let chi2 = chi2_divergence_closed_form(&p, &h.gamma, 40)?;
        worst_ratio = worst_ratio.max(chi2 / (4.0 * (1.0 - eta).powi(2)));
        cases += 1;
    }
    Ok(OracleCheck {
        name: "chi2_certificate".into(),
        passed: worst_ratio <= 1.0 && cosh_ok,
        cases,
        worst: worst_ratio,
        detail: format!(
            "max certificate / 4(1−η)² = {worst_ratio:.4}, cosh bound dominates: {cosh_ok}"
        ),
    })
}

fn check_pmfs() -> OracleCheck {
    let cases = [
        (exact_pmf(PmfLaw::Poisson { lambda: 0.0 }, 0), 1.0),
        (exact_pmf(PmfLaw::Binomial { n: 2, p: 0.5 }, 1), 0.5),
        (exact_pmf(PmfLaw::Poisson { lambda: 3.0 }, 3), (-3.0f64).exp() * 4.5),
        (exact_pmf(PmfLaw::Binomial { n: 10, p: 0.3 }, 0), 0.7f64.powi(10)),
        (poisson_cdf(3.0, 2), (-3.0f64).exp() * 8.5),
    ];
    let worst = cases.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let sums = [
        csum((0..=30).map(|x| binomial_pmf(30, 0.37, x))),
        csum((0..=200).map(|x| poisson_pmf(25.0, x))),
    ];
    let worst = sums.iter().map(|s| (s - 1.0).abs()).fold(worst, f64::max);
    OracleCheck {
        name: "pmf".into(),
        passed: worst <= 1e-13,
        cases: cases.len() + sums.len(),
        worst,
        detail: format!("max deviation from reference values = {worst:.3e}"),
    }
}

fn check_tail_collisions() -> Result<OracleCheck> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for &n in &[2u64, 3, 4] {
        for p in [vec![0.2, 0.05, 0.01], vec![0.1, 0.08, 0.08], vec![0.3, 0.0, 0.0]] {
            let tv = exact_tv_tail_prior(&p, 2, 0.2, n)?;
            let bound: f64 = p[1..].iter().map(|x| (n as f64 * x).powi(2)).sum();
            if bound > 0.0 {
                worst = worst.max(tv.collision_mass_null / bound);
            } else if tv.collision_mass_null > 0.0 || tv.tv > 0.0 {
                worst = f64::INFINITY;
            }
            cases += 1;
        }
    }
    Ok(OracleCheck {
        name: "tail_collision_mass".into(),
        passed: worst <= 1.0,
        cases,
        worst,
        detail: format!("max P(N_j ≥ 2) / Σ n² p_j² = {worst:.4}"),
    })
}

/// Runs every cross-validation check with fixed seeds.
pub fn run_battery() -> Result<OracleReport> {
    let checks = vec![
        check_pmfs(),
        check_moments(11, 4)?,
        check_chi2_closed_form(12, 50)?,
        check_certificate(&[0.1, 0.2, 0.5])?,
        check_tail_collisions()?,
    ];
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(OracleReport { checks, all_passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pmf_values() {
        assert_eq!(exact_pmf(PmfLaw::Poisson { lambda: 0.0 }, 0), 1.0);
        assert_relative_eq!(exact_pmf(PmfLaw::Binomial { n: 2, p: 0.5 }, 1), 0.5, epsilon = 1e-15);
        assert_relative_eq!(
            exact_pmf(PmfLaw::Poisson { lambda: 3.0 }, 3),
            0.224_041_807_655_387_75,
            epsilon = 1e-15
        );
        assert_eq!(binomial_pmf(3, 0.0, 1), 0.0);
        assert_eq!(binomial_pmf(3, 1.0, 3), 1.0);
    }

    #[test]
    fn cdf_both_sides() {
        let direct = |l: f64, m: u64| csum((0..=m).map(|x| poisson_pmf(l, x)));
        for &(l, m) in &[(3.0, 1u64), (3.0, 6), (100.0, 80), (100.0, 120), (1e4, 9800)] {
            assert!((poisson_cdf(l, m) - direct(l, m)).abs() < 1e-13, "λ={l} m={m}");
        }
        assert_eq!(poisson_cdf(0.0, 0), 1.0);
        assert_eq!(poisson_cdf(5.0, 10_000), 1.0);
    }

    #[test]
    fn compensated_sum_is_order_independent() {
        let xs: Vec<f64> = (0..1000).map(|i| 1.0 / (1.0 + i as f64).powi(2) * if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
        let a = csum(xs.iter().copied());
        let b = csum(xs.iter().rev().copied());
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn law_probabilities_sum_to_one() {
        for kind in [ModelKind::Binomial, ModelKind::Poisson, ModelKind::Multinomial] {
            let law = count_law(kind, &[0.3, 0.2], 4).unwrap();
            assert!((csum(law.iter().map(|x| x.1)) - 1.0).abs() < 1e-14);
        }
        assert!(count_law(ModelKind::Binomial, &[0.1; 12], 6).is_err());
    }

    #[test]
    fn bulk_example_from_enumeration() {
        let e = enumerate_statistic_moments(
            ModelKind::Binomial,
            &[0.5],
            &[0.7],
            3,
            StatisticKind::TBulk { a: 1, b: 0.0 },
        )
        .unwrap();
        assert_relative_eq!(e.mean, 0.04, epsilon = 1e-12);
        assert_relative_eq!(e.variance, 0.0105, epsilon = 1e-12);
    }

    #[test]
    fn factorized_path_agrees_with_pairs() {
        // Poisson with a large half exceeds the pair cap and takes the
        // factorized path; compare with the closed form.
        let p = [0.4, 0.3, 0.2];
        let q = [0.5, 0.25, 0.3];
        let e = enumerate_statistic_moments(ModelKind::Poisson, &p, &q, 4, StatisticKind::TBulk { a: 3, b: 0.5 })
            .unwrap();
        let c = moments_t_bulk(ModelKind::Poisson, &p, &q, 3, 0.5, 4).unwrap();
        assert!((e.mean - c.mean).abs() < 1e-12);
        assert!((e.variance - c.variance_exact).abs() < 1e-12);
    }

    #[test]
    fn p_equals_q_means_zero() {
        for kind in [ModelKind::Binomial, ModelKind::Poisson, ModelKind::Multinomial] {
            let p = [0.3, 0.2];
            let e = enumerate_statistic_moments(kind, &p, &p, 3, StatisticKind::TBulk { a: 2, b: 2.0 / 3.0 })
                .unwrap();
            assert!(e.mean.abs() < 1e-14);
            assert!(e.variance >= 0.0);
        }
    }

    #[test]
    fn chi2_enumeration() {
        assert!(exact_mixture_chi2(&[0.3, 0.4], &[0.0, 0.0], 4).unwrap().abs() < 1e-15);
        let v = exact_mixture_chi2(&[0.5], &[0.1], 2).unwrap();
        assert_relative_eq!(v, 0.0016, epsilon = 1e-14);
        assert!(exact_mixture_chi2(&[0.3; 3], &[0.0; 3], 2).is_err());
        // Monotone in γ.
        let mut prev = 0.0;
        for g in 0..=10 {
            let v = exact_mixture_chi2(&[0.3, 0.4], &[0.03 * g as f64, 0.01], 3).unwrap();
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn tail_tv() {
        let r = exact_tv_tail_prior(&[0.3, 0.0, 0.0], 2, 0.5, 4).unwrap();
        assert_eq!(r.tv, 0.0);
        let r = exact_tv_tail_prior(&[0.3, 0.1, 0.1], 2, 0.1, 3).unwrap();
        // π_i = 1: the mixture is the null itself.
        assert!(r.tv.abs() < 1e-15);
        let r = exact_tv_tail_prior(&[0.3, 0.05, 0.02], 2, 0.2, 4).unwrap();
        assert!(r.tv > 0.0 && r.tv < 1.0);
        assert!(r.collision_mass_mixture >= r.collision_mass_null);
    }

    #[test]
    fn battery_passes() {
        let rep = run_battery().unwrap();
        for c in &rep.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert!(rep.all_passed);
    }
}

//! The test battery and the closed-form moments of its statistics.
//!
//! The default decision is `ψ = ψ_bulk ∨ ψ₁ ∨ ψ₂`:
//!
//! - `ψ_bulk` rejects when the split weighted χ² statistic
//!   `T_bulk = Σ_{i≤A} p_i^{−b} (S_i/k − p_i)(S′_i/k − p_i)` exceeds
//!   `(uc/n) (Σ_{i≤A} p_i^r)^{1/2}`;
//! - `ψ₁` rejects when `|Σ_{i>A} N_i/n − p_i| > uc √(Σ_{i>A} p_i / n)`;
//! - `ψ₂` rejects when some tail coordinate is observed twice.
//!
//! For `t = 2` the whole vector is treated as bulk and `ψ` reduces to a
//! single unweighted χ² test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    canonicalize, BulkVariant, CanonicalNull, IndexProfile, ModelKind, NullSpec, SampleSet,
    TestVerdict,
};
use crate::rates::index_profile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    pub bulk_variant: BulkVariant,
    /// Add the tail χ² test `|T₂| > (uc/n) ‖p_{>A}‖₂` to the aggregate.
    pub include_t2: bool,
    /// Reject outright when a coordinate with null mass zero is observed.
    pub strict_impossible: bool,
    /// At `t = 2`, put every coordinate in the bulk.
    pub l2_single_chi2: bool,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            bulk_variant: BulkVariant::Split,
            include_t2: false,
            strict_impossible: true,
            l2_single_chi2: true,
        }
    }
}

/// Everything about the test that depends on `(spec, n)` only.
#[derive(Debug, Clone)]
pub struct PreparedTest {
    canon: CanonicalNull,
    profile: IndexProfile,
    n: u64,
    opts: TestOptions,
    offset: usize,
    weights: Vec<f64>,
    thr_bulk: f64,
    thr_t1: f64,
    thr_t2: f64,
    zero_coords: Vec<usize>,
}

/// Profile actually used by the test: at `t = 2` in single-χ² mode the cut
/// `A` is moved to the end of the vector.
pub fn test_profile(
    canon: &CanonicalNull,
    n: u64,
    t: f64,
    spec: &NullSpec,
    opts: &TestOptions,
) -> Result<IndexProfile> {
    let mut prof = index_profile(canon, n, t, spec.constants())?;
    if t == 2.0 && opts.l2_single_chi2 {
        let p = canon.effective();
        prof.a = p.len();
        prof.sum_r_le_a = p.iter().map(|x| x * x).sum();
        prof.mass_gt_a = 0.0;
        prof.sq_gt_a = 0.0;
    }
    Ok(prof)
}

impl PreparedTest {
    pub fn new(spec: &NullSpec, n: u64, opts: TestOptions) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewSamples(n));
        }
        let canon = canonicalize(spec);
        let profile = test_profile(&canon, n, spec.t(), spec, &opts)?;
        let (uc, nf) = (spec.constants().uc, n as f64);
        let offset = canon.effective_offset();
        let p = canon.effective();
        let weights = bulk_weights(p, &profile)?;
        let (thr_bulk, thr_t1) = thresholds_from(&profile, n, uc);
        let thr_t2 = uc / nf * profile.sq_gt_a.sqrt();
        let zero_coords = canon
            .p_sorted
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 0.0)
            .map(|(j, _)| j)
            .collect();
        Ok(PreparedTest {
            canon,
            profile,
            n,
            opts,
            offset,
            weights,
            thr_bulk,
            thr_t1,
            thr_t2,
            zero_coords,
        })
    }

    pub fn canonical(&self) -> &CanonicalNull {
        &self.canon
    }

    pub fn profile(&self) -> &IndexProfile {
        &self.profile
    }

    pub fn options(&self) -> &TestOptions {
        &self.opts
    }

    pub fn thresholds(&self) -> (f64, f64) {
        (self.thr_bulk, self.thr_t1)
    }

    fn check(&self, sample: &SampleSet) -> Result<()> {
        if sample.dim() != self.canon.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.canon.dim(),
                found: sample.dim(),
            });
        }
        if sample.n != self.n {
            return Err(Error::OutOfRange(format!(
                "test prepared for n = {}, sample has n = {}",
                self.n, sample.n
            )));
        }
        Ok(())
    }

    fn bulk_stat(&self, sample: &SampleSet) -> f64 {
        let p = self.canon.effective();
        let off = self.offset;
        match self.opts.bulk_variant {
            BulkVariant::Split => {
                let k = sample.k as f64;
                let mut acc = 0.0;
                for (i, w) in self.weights.iter().enumerate() {
                    let x = sample.s[off + i] as f64 / k - p[i];
                    let y = sample.s_prime[off + i] as f64 / k - p[i];
                    acc += w * x * y;
                }
                acc
            }
            BulkVariant::NoSplitPrinted | BulkVariant::NoSplitNormalized => {
                let nf = sample.n as f64;
                let scale = match self.opts.bulk_variant {
                    BulkVariant::NoSplitPrinted => 1.0,
                    _ => 1.0 / (nf * nf),
                };
                let mut acc = 0.0;
                for (i, w) in self.weights.iter().enumerate() {
                    let h = sample.histogram[off + i] as f64;
                    let d = h / nf - p[i];
                    acc += w * (d * d - scale * h);
                }
                acc
            }
        }
    }

    fn t1_stat(&self, sample: &SampleSet) -> f64 {
        let p = self.canon.effective();
        let nf = sample.n as f64;
        let off = self.offset;
        (self.profile.a..p.len())
            .map(|i| sample.histogram[off + i] as f64 / nf - p[i])
            .sum()
    }

    fn collision(&self, sample: &SampleSet) -> bool {
        let off = self.offset;
        sample.histogram[off + self.profile.a..].iter().any(|&h| h >= 2)
    }

    fn t2_stat(&self, sample: &SampleSet) -> f64 {
        let p = self.canon.effective();
        let k = sample.k as f64;
        let off = self.offset;
        (self.profile.a..p.len())
            .map(|i| {
                (sample.s[off + i] as f64 / k - p[i]) * (sample.s_prime[off + i] as f64 / k - p[i])
            })
            .sum()
    }

    fn impossible(&self, sample: &SampleSet) -> bool {
        self.opts.strict_impossible && self.zero_coords.iter().any(|&j| sample.histogram[j] > 0)
    }

    /// Aggregate decision only; the hot path of the Monte Carlo engine.
    pub fn rejects(&self, sample: &SampleSet) -> bool {
        if self.impossible(sample) || self.collision(sample) {
            return true;
        }
        if self.t1_stat(sample).abs() > self.thr_t1 {
            return true;
        }
        if self.profile.a > 0 && self.bulk_stat(sample) > self.thr_bulk {
            return true;
        }
        self.opts.include_t2 && self.t2_stat(sample).abs() > self.thr_t2
    }

    pub fn verdict(&self, sample: &SampleSet) -> Result<TestVerdict> {
        self.check(sample)?;
        let t_bulk = if self.profile.a > 0 {
            self.bulk_stat(sample)
        } else {
            0.0
        };
        let t1 = self.t1_stat(sample);
        let collision_found = self.collision(sample);
        let decide_bulk = self.profile.a > 0 && t_bulk > self.thr_bulk;
        let decide_t1 = t1.abs() > self.thr_t1;
        let decide_psi2 = collision_found;
        let (t2, thr_t2, decide_t2) = if self.opts.include_t2 {
            let v = self.t2_stat(sample);
            (Some(v), Some(self.thr_t2), v.abs() > self.thr_t2)
        } else {
            (None, None, false)
        };
        let impossible_under_null = self.impossible(sample);
        let mut reasons = Vec::new();
        if impossible_under_null {
            reasons.push("impossible-under-null");
        }
        if decide_bulk {
            reasons.push("bulk");
        }
        if decide_t1 {
            reasons.push("tail-mass");
        }
        if decide_psi2 {
            reasons.push("tail-collision");
        }
        if decide_t2 {
            reasons.push("tail-chi2");
        }
        let decide_aggregate = !reasons.is_empty();
        Ok(TestVerdict {
            t_bulk,
            t1,
            collision_found,
            thr_bulk: self.thr_bulk,
            thr_t1: self.thr_t1,
            decide_bulk,
            decide_t1,
            decide_psi2,
            decide_aggregate,
            bulk_variant: self.opts.bulk_variant,
            t2,
            thr_t2,
            decide_t2,
            impossible_under_null,
            reason: if reasons.is_empty() {
                None
            } else {
                Some(reasons.join(","))
            },
            profile: self.profile.clone(),
        })
    }
}

fn bulk_weights(p: &[f64], prof: &IndexProfile) -> Result<Vec<f64>> {
    p[..prof.a]
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if x == 0.0 && prof.b > 0.0 {
                Err(Error::Internal(format!(
                    "bulk coordinate {} has zero null mass",
                    i + 1
                )))
            } else {
                Ok(x.powf(-prof.b))
            }
        })
        .collect()
}

fn thresholds_from(prof: &IndexProfile, n: u64, uc: f64) -> (f64, f64) {
    let nf = n as f64;
    let thr_bulk = if prof.a == 0 {
        0.0
    } else {
        uc / nf * prof.sum_r_le_a.sqrt()
    };
    let thr_t1 = uc * (prof.mass_gt_a / nf).sqrt();
    (thr_bulk, thr_t1)
}

/// `(thr_bulk, thr_t1) = ((uc/n)(Σ_{i≤A} p_i^r)^{1/2}, uc √(Σ_{i>A} p_i / n))`.
pub fn thresholds(prof: &IndexProfile, n: u64, uc: f64) -> (f64, f64) {
    thresholds_from(prof, n, uc)
}

/// Runs the default test.
pub fn run_test(spec: &NullSpec, sample: &SampleSet) -> Result<TestVerdict> {
    run_test_with(spec, sample, TestOptions::default())
}

pub fn run_test_with(spec: &NullSpec, sample: &SampleSet, opts: TestOptions) -> Result<TestVerdict> {
    if sample.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: sample.dim(),
        });
    }
    PreparedTest::new(spec, sample.n, opts)?.verdict(sample)
}

fn check_bulk(canon: &CanonicalNull, sample: &SampleSet, prof: &IndexProfile) -> Result<()> {
    if sample.dim() != canon.dim() {
        return Err(Error::DimensionMismatch {
            expected: canon.dim(),
            found: sample.dim(),
        });
    }
    if prof.a == 0 {
        return Err(Error::EmptyBulk);
    }
    Ok(())
}

/// `T_bulk = Σ_{i≤A} p_i^{−b} (S_i/k − p_i)(S′_i/k − p_i)`.
pub fn t_bulk(sample: &SampleSet, canon: &CanonicalNull, prof: &IndexProfile) -> Result<f64> {
    check_bulk(canon, sample, prof)?;
    if sample.k == 0 {
        return Err(Error::TooFewSamples(sample.n));
    }
    let w = bulk_weights(canon.effective(), prof)?;
    let p = canon.effective();
    let off = canon.effective_offset();
    let k = sample.k as f64;
    Ok(w.iter()
        .enumerate()
        .map(|(i, wi)| {
            wi * (sample.s[off + i] as f64 / k - p[i]) * (sample.s_prime[off + i] as f64 / k - p[i])
        })
        .sum())
}

/// `Σ_{j≤A} p_j^{−b} [(H_j/n − p_j)² − c H_j]` with `c = 1` for
/// [`BulkVariant::NoSplitPrinted`] and `c = 1/n²` otherwise.
pub fn t_bulk_nosplit(
    sample: &SampleSet,
    canon: &CanonicalNull,
    prof: &IndexProfile,
    variant: BulkVariant,
) -> Result<f64> {
    check_bulk(canon, sample, prof)?;
    if sample.n == 0 {
        return Err(Error::TooFewSamples(0));
    }
    let w = bulk_weights(canon.effective(), prof)?;
    let p = canon.effective();
    let off = canon.effective_offset();
    let nf = sample.n as f64;
    let c = match variant {
        BulkVariant::NoSplitPrinted => 1.0,
        _ => 1.0 / (nf * nf),
    };
    Ok(w.iter()
        .enumerate()
        .map(|(i, wi)| {
            let h = sample.histogram[off + i] as f64;
            wi * ((h / nf - p[i]).powi(2) - c * h)
        })
        .sum())
}

/// `T₁ = Σ_{i>A} N_i/n − p_i`.
pub fn t1_tail(sample: &SampleSet, canon: &CanonicalNull, prof: &IndexProfile) -> Result<f64> {
    if sample.n == 0 {
        return Err(Error::TooFewSamples(0));
    }
    let p = canon.effective();
    let off = canon.effective_offset();
    let nf = sample.n as f64;
    Ok((prof.a..p.len())
        .map(|i| sample.histogram[off + i] as f64 / nf - p[i])
        .sum::<f64>()
        + 0.0)
}

/// True iff some coordinate beyond `A` has count at least two.
pub fn psi2_collision(sample: &SampleSet, canon: &CanonicalNull, prof: &IndexProfile) -> bool {
    let off = canon.effective_offset();
    sample.histogram[off + prof.a..].iter().any(|&h| h >= 2)
}

/// `T₂ = Σ_{i>A} (S_i/k − p_i)(S′_i/k − p_i)`.
pub fn t2_tail(sample: &SampleSet, canon: &CanonicalNull, prof: &IndexProfile) -> Result<f64> {
    if sample.k == 0 {
        return Err(Error::TooFewSamples(sample.n));
    }
    let p = canon.effective();
    let off = canon.effective_offset();
    let k = sample.k as f64;
    Ok((prof.a..p.len())
        .map(|i| (sample.s[off + i] as f64 / k - p[i]) * (sample.s_prime[off + i] as f64 / k - p[i]))
        .sum::<f64>()
        + 0.0)
}

/// The ℓ₂ identity test on a flattened symmetric matrix: reject when
/// `|T₂| > C_η ‖p‖₂ / n` over every coordinate.
pub fn frobenius_test(spec: &NullSpec, sample: &SampleSet) -> Result<(f64, f64, bool)> {
    if sample.n < 2 {
        return Err(Error::TooFewSamples(sample.n));
    }
    let canon = canonicalize(spec);
    let mut prof = index_profile(&canon, sample.n, spec.t(), spec.constants())?;
    prof.a = 0;
    let t2 = t2_tail(sample, &canon, &prof)?;
    let norm = canon.effective().iter().map(|x| x * x).sum::<f64>().sqrt();
    let thr = spec.constants().c_eta_frob * norm / sample.n as f64;
    Ok((t2, thr, t2.abs() > thr))
}

/// Exact mean, the variance upper bound, and the exact variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance_upper: f64,
    pub variance_exact: f64,
}

/// Per-unit variance of a count: `q(1−q)` for Bernoulli and categorical
/// draws, `q` for Poisson.
fn unit_var(kind: ModelKind, q: f64) -> f64 {
    match kind {
        ModelKind::Poisson => q,
        _ => q * (1.0 - q),
    }
}

/// Moments of `Σ_{i<a} w_i (S_i/k − p_i)(S′_i/k − p_i)` with `w_i = p_i^{−b}`.
///
/// `p` and `q` list the coordinates the statistic sums over (for a
/// multinomial model, a subset of categories).
pub fn moments_t_bulk(kind: ModelKind, p: &[f64], q: &[f64], a: usize, b: f64, k: u64) -> Result<Moments> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    if k == 0 {
        return Err(Error::TooFewSamples(0));
    }
    let idx: Vec<usize> = (0..a.min(p.len())).collect();
    let w: Vec<f64> = idx.iter().map(|&i| p[i].powf(-b)).collect();
    Ok(product_moments(kind, p, q, &idx, &w, k))
}

/// Moments of `T₂ = Σ_{i≥a} (S_i/k − p_i)(S′_i/k − p_i)`.
pub fn moments_t2(kind: ModelKind, p: &[f64], q: &[f64], a: usize, k: u64) -> Result<Moments> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    if k == 0 {
        return Err(Error::TooFewSamples(0));
    }
    let idx: Vec<usize> = (a.min(p.len())..p.len()).collect();
    let w = vec![1.0; idx.len()];
    Ok(product_moments(kind, p, q, &idx, &w, k))
}

fn product_moments(kind: ModelKind, p: &[f64], q: &[f64], idx: &[usize], w: &[f64], k: u64) -> Moments {
    let kf = k as f64;
    let mut mean = 0.0;
    let mut upper = 0.0;
    let mut exact = 0.0;
    for (&i, &wi) in idx.iter().zip(w) {
        let d2 = (q[i] - p[i]).powi(2);
        mean += wi * d2;
        upper += wi * wi * (q[i] * q[i] / (kf * kf) + 2.0 * q[i] * d2 / kf);
        let v = unit_var(kind, q[i]);
        exact += wi * wi * (v * v / (kf * kf) + 2.0 * v * d2 / kf);
    }
    if kind == ModelKind::Multinomial {
        // Off-diagonal terms: Cov(S_i/k, S_j/k) = −q_i q_j / k.
        for (x, (&i, &wi)) in idx.iter().zip(w).enumerate() {
            for (&j, &wj) in idx[x + 1..].iter().zip(&w[x + 1..]) {
                let c = -q[i] * q[j] / kf;
                let di = q[i] - p[i];
                let dj = q[j] - p[j];
                exact += 2.0 * wi * wj * (c * c + 2.0 * c * di * dj);
            }
        }
    }
    Moments {
        mean,
        variance_upper: upper,
        variance_exact: exact,
    }
}

/// Moments of `T₁ = Σ_{i≥a} N_i/n − p_i`.
pub fn moments_t1(kind: ModelKind, p: &[f64], q: &[f64], a: usize, n: u64) -> Result<Moments> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    if n == 0 {
        return Err(Error::TooFewSamples(0));
    }
    let nf = n as f64;
    let a = a.min(p.len());
    let mean = (a..p.len()).map(|i| q[i] - p[i]).sum();
    let upper = (a..p.len()).map(|i| q[i]).sum::<f64>() / nf;
    let exact = match kind {
        ModelKind::Multinomial => {
            let m: f64 = q[a..].iter().sum();
            m * (1.0 - m) / nf
        }
        _ => (a..p.len()).map(|i| unit_var(kind, q[i])).sum::<f64>() / nf,
    };
    Ok(Moments {
        mean,
        variance_upper: upper,
        variance_exact: exact,
    })
}

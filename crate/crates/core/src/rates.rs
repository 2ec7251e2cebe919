//! Exponents, cut indices and the local minimax separation radius.
//!
//! All index functions take the effective coordinates of a canonical null
//! (nonincreasing) and return 1-based cut positions: a cut `J` splits the
//! vector into `p_{≤J}` (the first `J` entries) and `p_{>J}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{canonicalize, CanonicalNull, ConstantLedger, IndexProfile, NullSpec, RateBreakdown};

/// `(r, b) = (2t/(4−t), (4−2t)/(4−t))`.
pub fn exponents(t: f64) -> Result<(f64, f64)> {
    if !(1.0..=2.0).contains(&t) {
        return Err(Error::ExponentOutOfRange(t));
    }
    Ok((2.0 * t / (4.0 - t), (4.0 - 2.0 * t) / (4.0 - t)))
}

/// `tails[J] = Σ_{i>J} f(p_i)` for `J = 0..=N`, accumulated right to left.
fn suffix_sums(p: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for j in (0..p.len()).rev() {
        out[j] = out[j + 1] + f(p[j]);
    }
    out
}

/// Smallest `J ∈ [0, N]` with `Σ_{i>J} p_i² ≤ c_I/n²`.
pub fn index_i(p_sorted: &[f64], n: u64, c_i: f64) -> usize {
    let thr = c_i / (n as f64 * n as f64);
    let tails = suffix_sums(p_sorted, |x| x * x);
    tails.iter().position(|&s| s <= thr).unwrap_or(p_sorted.len())
}

/// Largest `a ≤ I` with `p_a > 0` and
/// `p_a^{b/2} ≥ c_A / (√n (Σ_{i≤I} p_i^r)^{1/4})`; `0` when none qualifies.
pub fn index_a(p_sorted: &[f64], i: usize, n: u64, t: f64, c_a4: f64) -> Result<usize> {
    let (r, b) = exponents(t)?;
    let s_i: f64 = p_sorted[..i].iter().map(|&x| x.powf(r)).sum();
    let c_a = c_a4.powf(0.25);
    let thr = c_a / ((n as f64).sqrt() * s_i.powf(0.25));
    Ok((1..=i)
        .rev()
        .find(|&a| {
            let pa = p_sorted[a - 1];
            pa > 0.0 && pa.powf(b / 2.0) >= thr
        })
        .unwrap_or(0))
}

/// Smallest `U > I` with `n² p_U ‖p_{≥U}‖₁ ≤ c_u`, if any.
pub fn index_u(p_sorted: &[f64], i: usize, n: u64, c_u: f64) -> Option<usize> {
    let n2 = n as f64 * n as f64;
    let tails = suffix_sums(p_sorted, |x| x);
    ((i + 1)..=p_sorted.len()).find(|&u| n2 * p_sorted[u - 1] * tails[u - 1] <= c_u)
}

/// `(Σ_{lo<i≤hi} p_i^s)^{1/s}` with 1-based positions; `0` on an empty range.
pub fn partial_norm(p_sorted: &[f64], lo: usize, hi: usize, s: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let sum: f64 = p_sorted[lo..hi].iter().map(|&x| x.powf(s)).sum();
    if sum == 0.0 {
        0.0
    } else {
        sum.powf(1.0 / s)
    }
}

/// Computes `(r, b)`, `I`, `A`, `U` and the partial sums on the effective
/// coordinates of `canon`.
pub fn index_profile(
    canon: &CanonicalNull,
    n: u64,
    t: f64,
    ledger: &ConstantLedger,
) -> Result<IndexProfile> {
    let p = canon.effective();
    let (r, b) = exponents(t)?;
    let i = index_i(p, n, ledger.c_i);
    let a = index_a(p, i, n, t, ledger.c_a4)?;
    let u = index_u(p, i, n, ledger.c_u);
    let pow_r = |xs: &[f64]| xs.iter().map(|&x| x.powf(r)).sum::<f64>();
    Ok(IndexProfile {
        r,
        b,
        i,
        a,
        u,
        dim: p.len(),
        sum_r_le_i: pow_r(&p[..i]),
        sum_r_le_a: pow_r(&p[..a]),
        // `+ 0.0` turns the empty sum (−0.0) into 0.
        mass_gt_i: p[i..].iter().sum::<f64>() + 0.0,
        mass_gt_a: p[a..].iter().sum::<f64>() + 0.0,
        sq_gt_a: p[a..].iter().map(|x| x * x).sum::<f64>() + 0.0,
        mass_ge_u: u.map(|u| p[u - 1..].iter().sum::<f64>() + 0.0),
    })
}

pub fn index_profile_for(spec: &NullSpec, n: u64) -> Result<IndexProfile> {
    index_profile(&canonicalize(spec), n, spec.t(), spec.constants())
}

/// Which cut the tail term of the rate is taken beyond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailCut {
    #[default]
    I,
    A,
}

fn tail_term(mass: f64, n: u64, t: f64) -> f64 {
    if t == 2.0 {
        // ‖·‖₁⁰ / n is the 1/n term already counted.
        return 0.0;
    }
    mass.powf((2.0 - t) / t) / (n as f64).powf((2.0 * t - 2.0) / t)
}

/// `ρ* = √(‖p_{≤I}‖_r / n) + ‖p_{>I}‖₁^{(2−t)/t} / n^{(2t−2)/t} + 1/n`,
/// computed on the effective coordinates (a multinomial null drops its
/// largest category).
pub fn minimax_rate(spec: &NullSpec, n: u64) -> Result<RateBreakdown> {
    minimax_rate_with(spec, n, TailCut::I)
}

pub fn minimax_rate_with(spec: &NullSpec, n: u64, cut: TailCut) -> Result<RateBreakdown> {
    check_n(n)?;
    let prof = index_profile_for(spec, n)?;
    Ok(rate_from_profile(&prof, n, spec.t(), cut))
}

pub fn rate_from_profile(prof: &IndexProfile, n: u64, t: f64, cut: TailCut) -> RateBreakdown {
    let nf = n as f64;
    let norm_r = if prof.sum_r_le_i > 0.0 {
        prof.sum_r_le_i.powf(1.0 / prof.r)
    } else {
        0.0
    };
    let bulk_term = (norm_r / nf).sqrt();
    let mass = match cut {
        TailCut::I => prof.mass_gt_i,
        TailCut::A => prof.mass_gt_a,
    };
    let tail_term = tail_term(mass, n, t);
    let inv_n_term = 1.0 / nf;
    RateBreakdown {
        bulk_term,
        tail_term,
        inv_n_term,
        total: bulk_term + tail_term + inv_n_term,
    }
}

/// The lower-bound form of the rate, with the bulk term
/// `‖p_{≤A}‖_r^{r/t} / (√n ‖p_{≤I}‖_r^{r/4})`.
pub fn lower_bound_rate(spec: &NullSpec, n: u64) -> Result<RateBreakdown> {
    check_n(n)?;
    let prof = index_profile_for(spec, n)?;
    Ok(lower_bound_from_profile(&prof, n, spec.t()))
}

pub fn lower_bound_from_profile(prof: &IndexProfile, n: u64, t: f64) -> RateBreakdown {
    let nf = n as f64;
    let bulk_term = if prof.sum_r_le_i > 0.0 {
        prof.sum_r_le_a.powf(1.0 / t) / (nf.sqrt() * prof.sum_r_le_i.powf(0.25))
    } else {
        0.0
    };
    let tail_term = tail_term(prof.mass_gt_i, n, t);
    let inv_n_term = 1.0 / nf;
    RateBreakdown {
        bulk_term,
        tail_term,
        inv_n_term,
        total: bulk_term + tail_term + inv_n_term,
    }
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::TooFewSamples(0));
    }
    Ok(())
}

/// Strict upper triangle of a symmetric matrix, row by row.
pub fn flatten_upper(m: &[Vec<f64>]) -> Result<Vec<f64>> {
    let size = m.len();
    for (i, row) in m.iter().enumerate() {
        if row.len() != size {
            return Err(Error::InvalidMatrix(format!(
                "row {i} has {} entries, expected {size}",
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidMatrix(format!("entry ({i}, {j}) = {v} outside [0, 1]")));
            }
            if v != m[j][i] {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({i}, {j}) = {v} differs from ({j}, {i}) = {}",
                    m[j][i]
                )));
            }
        }
    }
    let mut out = Vec::with_capacity(size * size.saturating_sub(1) / 2);
    for i in 0..size {
        out.extend_from_slice(&m[i][i + 1..]);
    }
    Ok(out)
}

/// `√(‖v‖₂ / n) + 1/n` where `v` is the strict upper triangle of `P`. Each
/// edge is counted once, so `‖v‖₂ = ‖P − diag(P)‖_F / √2`.
pub fn frobenius_rate(m: &[Vec<f64>], n: u64) -> Result<f64> {
    check_n(n)?;
    let v = flatten_upper(m)?;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok((norm / n as f64).sqrt() + 1.0 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointBounds {
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub ratio: f64,
    /// `ε₊ ≤ 16 (C/c) ε₋`.
    pub bounds_match: bool,
    /// `ε₊ ≤ 16 ε₋`.
    pub first_case: bool,
    pub iterations_plus: u32,
    pub iterations_minus: u32,
}

const FP_REL_TOL: f64 = 1e-10;
const FP_MAX_ITER: u32 = 200;

/// Truncated `‖·‖_{2/3}` norms of `p^{-max}`: `p_{−α}` keeps `p_2..p_J` with
/// `J` the smallest index such that `Σ_{i>J} p_i ≤ α`.
struct TruncatedNorm {
    p: Vec<f64>,
    tails: Vec<f64>,
    prefix: Vec<f64>,
}

impl TruncatedNorm {
    fn new(p_full: &[f64]) -> Self {
        let mut p = p_full.to_vec();
        p.sort_by(|a, b| b.total_cmp(a));
        let p: Vec<f64> = p.into_iter().skip(1).collect();
        let tails = suffix_sums(&p, |x| x);
        let mut prefix = vec![0.0; p.len() + 1];
        for j in 0..p.len() {
            prefix[j + 1] = prefix[j] + p[j].powf(2.0 / 3.0);
        }
        TruncatedNorm { p, tails, prefix }
    }

    fn eval(&self, alpha: f64) -> f64 {
        let j = self
            .tails
            .iter()
            .position(|&s| s <= alpha)
            .unwrap_or(self.p.len());
        let s = self.prefix[j];
        if s == 0.0 {
            0.0
        } else {
            s.powf(1.5)
        }
    }
}

/// Fixed-point upper and lower radii from the prior literature on
/// multinomial identity testing, solved by bisection.
pub fn fixed_point_bounds(p: &[f64], n: u64, c_upper: f64, c_lower: f64) -> Result<FixedPointBounds> {
    check_n(n)?;
    if !(c_lower > 0.0 && c_upper >= c_lower && c_upper.is_finite()) {
        return Err(Error::Bracket(format!(
            "need C ≥ c > 0, got C = {c_upper}, c = {c_lower}"
        )));
    }
    if p.is_empty() || p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidSpec("p must be a nonempty nonnegative vector".into()));
    }
    let nf = n as f64;
    let g = TruncatedNorm::new(p);
    let f_plus = |e: f64| c_upper * (g.eval(e / 16.0) / nf).sqrt() + c_upper / nf;
    let f_minus = |e: f64| c_lower * (g.eval(e) / nf).sqrt() + c_lower / nf;

    // ε ↦ f₊(ε) − ε is decreasing: find the last point where it is ≥ 0.
    let (mut lo, mut hi) = (0.0, f_plus(0.0));
    if hi - f_plus(hi) < 0.0 {
        return Err(Error::Bracket("upper fixed point not bracketed".into()));
    }
    let mut it_plus = 0;
    while it_plus < FP_MAX_ITER && hi - lo > FP_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if f_plus(mid) >= mid {
            lo = mid;
        } else {
            hi = mid;
        }
        it_plus += 1;
    }
    let eps_plus = {
        let v = f_plus(lo);
        if v == f_plus(hi) && (lo..=hi).contains(&v) {
            v
        } else {
            lo
        }
    };

    // ε ↦ ε − f₋(ε) is increasing: find the first point where it is ≥ 0.
    let (mut lo, mut hi) = (0.0, f_minus(0.0));
    if hi - f_minus(hi) < 0.0 {
        return Err(Error::Bracket("lower fixed point not bracketed".into()));
    }
    let mut it_minus = 0;
    while it_minus < FP_MAX_ITER && hi - lo > FP_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if mid >= f_minus(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        it_minus += 1;
    }
    let eps_minus = {
        let v = f_minus(hi);
        if v == f_minus(lo) && (lo..=hi).contains(&v) {
            v
        } else {
            hi
        }
    };

    let ratio = eps_plus / eps_minus;
    Ok(FixedPointBounds {
        eps_plus,
        eps_minus,
        ratio,
        bounds_match: eps_plus <= 16.0 * (c_upper / c_lower) * eps_minus,
        first_case: eps_plus <= 16.0 * eps_minus,
        iterations_plus: it_plus,
        iterations_minus: it_minus,
    })
}

//! Lower-bound alternatives and their χ² certificate.
//!
//! Three priors, all built in canonical order:
//!
//! - the bulk Rademacher prior `q_i = p_i ± γ_i` on `i ≤ A`, with
//!   `γ_i = c_γ p_i^{2/(4−t)} / (√n (Σ_{i≤I} p_i^r)^{1/4})`;
//! - the sparse tail prior `q_i = b_i π̄`, `b_i ~ Ber(p_i/π̄)` on `i ≥ U`, with
//!   `π̄ = c_u / (n² ‖p_{≥U}‖₁)`;
//! - a deterministic shift of the first coordinate by `(1−η)/n`.
//!
//! Multinomial alternatives perturb the effective coordinates and are then
//! renormalized onto the simplex; the largest category is never perturbed
//! directly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    canonicalize, lt_distance, AdversarialDraw, CanonicalNull, IndexProfile, ModelKind, NullSpec,
    PriorKind,
};
use crate::rates::{exponents, index_profile};

/// Unscaled bulk perturbation `γ_1..γ_A` for the effective coordinates `p`,
/// given `Σ_{i≤I} p_i^r`.
pub fn bulk_gamma(
    p: &[f64],
    a: usize,
    sum_r_le_i: f64,
    n: u64,
    t: f64,
    c_gamma: f64,
) -> Result<Vec<f64>> {
    if a == 0 {
        return Err(Error::PriorUndefined("the bulk is empty (A = 0)".into()));
    }
    let denom = (n as f64).sqrt() * sum_r_le_i.powf(0.25);
    let e = 2.0 / (4.0 - t);
    Ok(p[..a].iter().map(|&x| c_gamma * x.powf(e) / denom).collect())
}

/// Precomputed canonical view and indices for drawing alternatives.
#[derive(Debug, Clone)]
pub struct Adversary {
    spec: NullSpec,
    canon: CanonicalNull,
    profile: IndexProfile,
    n: u64,
}

impl Adversary {
    pub fn new(spec: &NullSpec, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::TooFewSamples(0));
        }
        let canon = canonicalize(spec);
        let profile = index_profile(&canon, n, spec.t(), spec.constants())?;
        Ok(Adversary {
            spec: spec.clone(),
            canon,
            profile,
            n,
        })
    }

    pub fn canonical(&self) -> &CanonicalNull {
        &self.canon
    }

    pub fn profile(&self) -> &IndexProfile {
        &self.profile
    }

    /// Checks that `kind` can be drawn here.
    pub fn supports(&self, kind: PriorKind) -> Result<()> {
        match kind {
            PriorKind::BulkRademacher => {
                if self.profile.a == 0 {
                    return Err(Error::PriorUndefined("the bulk is empty (A = 0)".into()));
                }
            }
            PriorKind::TailSparse => {
                self.tail_parameters(1.0)?;
            }
            PriorKind::SingleCoordinate => {
                self.single_coordinate()?;
            }
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, kind: PriorKind, scale: f64, rng: &mut R) -> Result<AdversarialDraw> {
        match kind {
            PriorKind::BulkRademacher => {
                let signs: Vec<bool> = (0..self.profile.a).map(|_| rng.random::<bool>()).collect();
                self.bulk_with_signs(scale, &signs)
            }
            PriorKind::TailSparse => self.tail(scale, rng),
            PriorKind::SingleCoordinate => self.single_coordinate(),
        }
    }

    /// Perturbation actually applied at `scale`: `scale·γ`, clamped to keep
    /// `q` inside the parameter space.
    pub fn bulk_perturbation(&self, scale: f64) -> Result<Vec<f64>> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::OutOfRange(format!("scale must be finite and ≥ 0, got {scale}")));
        }
        let p = self.canon.effective();
        let c = self.spec.constants();
        let gamma = bulk_gamma(p, self.profile.a, self.profile.sum_r_le_i, self.n, self.spec.t(), c.c_gamma)?;
        gamma
            .iter()
            .zip(p)
            .enumerate()
            .map(|(i, (&g, &pi))| {
                let cap = match self.canon.model {
                    ModelKind::Binomial => pi.min(1.0 - pi),
                    _ => pi,
                };
                if scale <= 1.0 && g > cap * (1.0 + 1e-12) {
                    return Err(Error::Internal(format!(
                        "γ_{} = {g} exceeds p_{} = {pi} at scale ≤ 1",
                        i + 1,
                        i + 1
                    )));
                }
                Ok((scale * g).min(cap))
            })
            .collect()
    }

    /// Bulk prior with the signs fixed (`true` is `+1`).
    pub fn bulk_with_signs(&self, scale: f64, signs: &[bool]) -> Result<AdversarialDraw> {
        let gamma = self.bulk_perturbation(scale)?;
        if signs.len() != gamma.len() {
            return Err(Error::DimensionMismatch {
                expected: gamma.len(),
                found: signs.len(),
            });
        }
        let off = self.canon.effective_offset();
        let mut q = self.canon.p_sorted.clone();
        for (i, (&g, &s)) in gamma.iter().zip(signs).enumerate() {
            q[off + i] += if s { g } else { -g };
        }
        self.finish(q, PriorKind::BulkRademacher, scale)
    }

    /// `(U, π̄, π)` at `scale`, where `π̄` is multiplied by `scale`.
    pub fn tail_parameters(&self, scale: f64) -> Result<(usize, f64, Vec<f64>)> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::OutOfRange(format!("tail scale must be finite and > 0, got {scale}")));
        }
        let u = self
            .profile
            .u
            .ok_or_else(|| Error::PriorUndefined("no index U > I satisfies the tail condition".into()))?;
        let mass = self.profile.mass_ge_u.unwrap_or(0.0);
        if mass <= 0.0 {
            return Err(Error::PriorUndefined("the tail beyond U has zero mass".into()));
        }
        let nf = self.n as f64;
        let pi_bar = scale * self.spec.constants().c_u / (nf * nf * mass);
        if self.canon.model != ModelKind::Poisson && pi_bar > 1.0 {
            return Err(Error::Infeasible(format!("π̄ = {pi_bar} exceeds one")));
        }
        let p = self.canon.effective();
        let pis: Vec<f64> = p[u - 1..].iter().map(|&x| x / pi_bar).collect();
        if let Some(bad) = pis.iter().position(|&x| x > 1.0) {
            return Err(Error::Infeasible(format!(
                "π_{} = {} exceeds one",
                u + bad,
                pis[bad]
            )));
        }
        Ok((u, pi_bar, pis))
    }

    fn tail<R: Rng + ?Sized>(&self, scale: f64, rng: &mut R) -> Result<AdversarialDraw> {
        let (u, pi_bar, pis) = self.tail_parameters(scale)?;
        let off = self.canon.effective_offset();
        let mut q = self.canon.p_sorted.clone();
        for (j, &pi) in pis.iter().enumerate() {
            q[off + u - 1 + j] = if rng.random::<f64>() < pi { pi_bar } else { 0.0 };
        }
        self.finish(q, PriorKind::TailSparse, scale)
    }

    /// `q_1 = p_1 + (1−η)/n` on the first effective coordinate. A multinomial
    /// alternative takes the mass from the largest category.
    pub fn single_coordinate(&self) -> Result<AdversarialDraw> {
        let delta = (1.0 - self.spec.eta()) / self.n as f64;
        let off = self.canon.effective_offset();
        let mut q = self.canon.p_sorted.clone();
        if off >= q.len() {
            return Err(Error::PriorUndefined("no effective coordinate".into()));
        }
        q[off] += delta;
        match self.canon.model {
            ModelKind::Binomial if q[off] > 1.0 => {
                return Err(Error::Infeasible(format!(
                    "p_1 + (1−η)/n = {} exceeds one",
                    q[off]
                )))
            }
            ModelKind::Multinomial => {
                if q[0] < delta {
                    return Err(Error::Infeasible(format!(
                        "largest category {} cannot give up {delta}",
                        q[0]
                    )));
                }
                q[0] -= delta;
            }
            _ => {}
        }
        self.finish(q, PriorKind::SingleCoordinate, 1.0)
    }

    fn finish(&self, mut q_canonical: Vec<f64>, kind: PriorKind, scale: f64) -> Result<AdversarialDraw> {
        if self.canon.model == ModelKind::Multinomial && kind != PriorKind::SingleCoordinate {
            let total: f64 = q_canonical.iter().sum();
            if total <= 0.0 {
                return Err(Error::Infeasible("perturbed vector has no mass".into()));
            }
            q_canonical.iter_mut().for_each(|x| *x /= total);
        }
        for (i, &v) in q_canonical.iter().enumerate() {
            let bad = v < 0.0 || (self.canon.model == ModelKind::Binomial && v > 1.0);
            if bad || !v.is_finite() {
                return Err(Error::Internal(format!(
                    "alternative leaves the parameter space at canonical coordinate {i}: {v}"
                )));
            }
        }
        let q = self.canon.to_original(&q_canonical);
        let realized_separation = lt_distance(self.spec.p(), &q, self.spec.t());
        Ok(AdversarialDraw {
            q,
            q_canonical,
            prior_kind: kind,
            scale,
            realized_separation,
        })
    }
}

/// Draws from the bulk prior at `scale`.
pub fn bulk_prior_draw<R: Rng + ?Sized>(spec: &NullSpec, n: u64, scale: f64, rng: &mut R) -> Result<AdversarialDraw> {
    Adversary::new(spec, n)?.draw(PriorKind::BulkRademacher, scale, rng)
}

/// Draws from the sparse tail prior at `scale`.
pub fn tail_prior_draw<R: Rng + ?Sized>(spec: &NullSpec, n: u64, scale: f64, rng: &mut R) -> Result<AdversarialDraw> {
    Adversary::new(spec, n)?.draw(PriorKind::TailSparse, scale, rng)
}

pub fn single_coordinate_draw(spec: &NullSpec, n: u64) -> Result<AdversarialDraw> {
    Adversary::new(spec, n)?.single_coordinate()
}

/// `Σ γ_i⁴ / p_i² ≤ budget / n²`; a zero `p_i` admits only `γ_i = 0`.
pub fn feasibility_check(p: &[f64], gamma: &[f64], n: u64, budget: f64) -> bool {
    let mut s = 0.0;
    for (&pi, &gi) in p.iter().zip(gamma) {
        if pi == 0.0 {
            if gi != 0.0 {
                return false;
            }
            continue;
        }
        s += gi.powi(4) / (pi * pi);
    }
    let nf = n as f64;
    s <= budget / (nf * nf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderGamma {
    /// After clamping to `[0, p_i]`.
    pub gamma: Vec<f64>,
    /// `λ p_i^{2/(4−t)}` before clamping.
    pub unclamped: Vec<f64>,
    pub lambda: f64,
    pub clamped: bool,
}

/// Maximizes `Σ γ_i^t` subject to `Σ γ_i⁴/p_i² ≤ budget/n²`: the optimum is
/// `γ_i = λ p_i^{2/(4−t)}` with `λ⁴ Σ p_i^r = budget/n²`, then clamped to the
/// box `[0, p_i]`.
pub fn holder_saturating_gamma(p: &[f64], n: u64, budget: f64, t: f64) -> Result<HolderGamma> {
    let (r, _) = exponents(t)?;
    if budget.is_nan() || budget <= 0.0 {
        return Err(Error::OutOfRange(format!("budget must be positive, got {budget}")));
    }
    let s: f64 = p.iter().map(|&x| x.powf(r)).sum();
    if s <= 0.0 {
        return Ok(HolderGamma {
            gamma: vec![0.0; p.len()],
            unclamped: vec![0.0; p.len()],
            lambda: 0.0,
            clamped: false,
        });
    }
    let nf = n as f64;
    let lambda = (budget / (nf * nf * s)).powf(0.25);
    let e = 2.0 / (4.0 - t);
    let unclamped: Vec<f64> = p.iter().map(|&x| lambda * x.powf(e)).collect();
    let gamma: Vec<f64> = unclamped.iter().zip(p).map(|(&g, &x)| g.min(x)).collect();
    let clamped = gamma != unclamped;
    Ok(HolderGamma {
        gamma,
        unclamped,
        lambda,
        clamped,
    })
}

fn chi2_x(p: f64, g: f64, i: usize) -> Result<Option<f64>> {
    if g == 0.0 {
        return Ok(None);
    }
    if g < 0.0 || g > p.min(1.0 - p) * (1.0 + 1e-12) {
        return Err(Error::Infeasible(format!(
            "γ_{} = {g} does not keep p_{} = {p} ± γ inside [0, 1]",
            i + 1,
            i + 1
        )));
    }
    Ok(Some(g * g / (p * (1.0 - p))))
}

/// `Π_i [½(1 + x_i)^n + ½(1 − x_i)^n] − 1` with `x_i = γ_i²/(p_i(1−p_i))`:
/// the χ² divergence between the Rademacher mixture and the null for `n`
/// Bernoulli-vector observations. Accumulated in log space.
pub fn chi2_divergence_closed_form(p: &[f64], gamma: &[f64], n: u64) -> Result<f64> {
    if p.len() != gamma.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: gamma.len(),
        });
    }
    let nf = n as f64;
    let mut log_prod = 0.0;
    for (i, (&pi, &gi)) in p.iter().zip(gamma).enumerate() {
        let Some(x) = chi2_x(pi, gi, i)? else { continue };
        // ½(1+x)^n (1 + ((1−x)/(1+x))^n)
        let ratio = (1.0 - x) / (1.0 + x);
        let rn = if ratio < 0.0 && n % 2 == 1 {
            -(-ratio).powf(nf)
        } else {
            ratio.abs().powf(nf)
        };
        log_prod += nf * x.ln_1p() + (0.5 * (1.0 + rn)).ln();
    }
    Ok(log_prod.exp_m1())
}

/// `exp(Σ n² γ_i⁴ / (2 p_i² (1−p_i)²)) − 1`, an upper bound on
/// [`chi2_divergence_closed_form`].
pub fn chi2_cosh_bound(p: &[f64], gamma: &[f64], n: u64) -> Result<f64> {
    let nf = n as f64;
    let mut s = 0.0;
    for (i, (&pi, &gi)) in p.iter().zip(gamma).enumerate() {
        let Some(x) = chi2_x(pi, gi, i)? else { continue };
        s += nf * nf * x * x / 2.0;
    }
    Ok(s.exp_m1())
}

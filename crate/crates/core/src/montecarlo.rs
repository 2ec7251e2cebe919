//! Parallel Monte Carlo estimates of type-I and type-II error.
//!
//! Trial `i` under master seed `s` uses its own generator
//! [`trial_rng`]`(s, i)`, and only the count of rejections is aggregated, so
//! results do not depend on the number of worker threads.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::Adversary;
use crate::error::{Error, Result};
use crate::model::{lt_distance, ModelKind, NullSpec, PriorKind};
use crate::sampling::{sample_unchecked, trial_rng};
use crate::statistics::{PreparedTest, TestOptions};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Environment variable consulted when no thread count is given.
pub const THREADS_ENV: &str = "MINITEST_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskKind {
    /// Rejections under the null.
    Type1,
    /// Acceptances under a prior over alternatives.
    Type2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub kind: RiskKind,
    pub trials: u64,
    pub rejections: u64,
    /// Error rate: rejections (type I) or acceptances (type II) over trials.
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub wall_time: f64,
}

impl RiskReport {
    fn new(kind: RiskKind, trials: u64, rejections: u64, seed: u64, wall_time: f64) -> Self {
        let errors = match kind {
            RiskKind::Type1 => rejections,
            RiskKind::Type2 => trials - rejections,
        };
        let (ci_low, ci_high) = wilson_interval(errors, trials, Z95);
        RiskReport {
            kind,
            trials,
            rejections,
            rate: if trials == 0 { 0.0 } else { errors as f64 / trials as f64 },
            ci_low,
            ci_high,
            seed,
            wall_time,
        }
    }

    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let m = trials as f64;
    let phat = successes as f64 / m;
    let z2 = z * z;
    let denom = 1.0 + z2 / m;
    let center = (phat + z2 / (2.0 * m)) / denom;
    let half = z / denom * (phat * (1.0 - phat) / m + z2 / (4.0 * m * m)).sqrt();
    (
        (center - half).max(0.0).min(phat),
        (center + half).min(1.0).max(phat),
    )
}

/// Run parameters shared by all estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; `None` reads [`THREADS_ENV`], then uses rayon's default.
    pub threads: Option<usize>,
    pub test: TestOptions,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        SimConfig {
            trials,
            seed,
            threads: None,
            test: TestOptions::default(),
        }
    }

    pub fn threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    fn resolved_threads(&self) -> Option<usize> {
        self.threads.or_else(|| {
            std::env::var(THREADS_ENV)
                .ok()
                .and_then(|v| v.trim().parse().ok())
        })
    }

    /// Counts trials for which `f` returns true.
    fn count<F>(&self, f: F) -> Result<u64>
    where
        F: Fn(u64) -> Result<bool> + Sync + Send,
    {
        let run = || -> Result<u64> {
            (0..self.trials)
                .into_par_iter()
                .map(|i| f(i).map(u64::from))
                .try_reduce(|| 0, |a, b| Ok(a + b))
        };
        match self.resolved_threads() {
            Some(k) if k > 0 => rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()?
                .install(run),
            _ => run(),
        }
    }
}

/// Type-I error of the aggregate test under `p`.
pub fn estimate_type1(spec: &NullSpec, n: u64, trials: u64, seed: u64) -> Result<RiskReport> {
    estimate_type1_with(spec, n, &SimConfig::new(trials, seed))
}

pub fn estimate_type1_with(spec: &NullSpec, n: u64, cfg: &SimConfig) -> Result<RiskReport> {
    let start = Instant::now();
    let test = PreparedTest::new(spec, n, cfg.test)?;
    let q = test.canonical().p_sorted.clone();
    let kind = spec.model();
    let rejections = cfg.count(|i| {
        let mut rng = trial_rng(cfg.seed, i);
        Ok(test.rejects(&sample_unchecked(kind, &q, n, &mut rng)))
    })?;
    Ok(RiskReport::new(
        RiskKind::Type1,
        cfg.trials,
        rejections,
        cfg.seed,
        start.elapsed().as_secs_f64(),
    ))
}

/// Prior-averaged type-II error: each trial draws `q` from the prior at
/// `scale`, samples from `q` and records whether the test accepts.
pub fn estimate_type2(
    spec: &NullSpec,
    n: u64,
    prior: PriorKind,
    scale: f64,
    trials: u64,
    seed: u64,
) -> Result<RiskReport> {
    estimate_type2_with(spec, n, prior, scale, &SimConfig::new(trials, seed))
}

pub fn estimate_type2_with(
    spec: &NullSpec,
    n: u64,
    prior: PriorKind,
    scale: f64,
    cfg: &SimConfig,
) -> Result<RiskReport> {
    let start = Instant::now();
    let test = PreparedTest::new(spec, n, cfg.test)?;
    let adv = Adversary::new(spec, n)?;
    adv.supports(prior)?;
    let kind = spec.model();
    let rejections = cfg.count(|i| {
        let mut rng = trial_rng(cfg.seed, i);
        let draw = adv.draw(prior, scale, &mut rng)?;
        Ok(test.rejects(&sample_unchecked(kind, &draw.q_canonical, n, &mut rng)))
    })?;
    Ok(RiskReport::new(
        RiskKind::Type2,
        cfg.trials,
        rejections,
        cfg.seed,
        start.elapsed().as_secs_f64(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusReport {
    pub prior_kind: PriorKind,
    pub power_target: f64,
    /// Smallest scale found whose type-II error is at most the target.
    pub scale: f64,
    /// Mean realized `ℓ_t` separation of draws at that scale.
    pub separation: f64,
    pub at_scale: RiskReport,
    pub iterations: u32,
}

/// Bisection steps in [`empirical_radius`].
pub const RADIUS_ITERATIONS: u32 = 20;

/// Draws averaged when reporting the separation of a random prior.
const SEPARATION_DRAWS: u64 = 64;

/// Searches `[lo, s_max]` for the smallest prior scale whose type-II error is
/// at most `power_target`. For the tail prior `lo` is the smallest scale at
/// which the prior is defined; otherwise it is zero.
pub fn empirical_radius(
    spec: &NullSpec,
    n: u64,
    prior: PriorKind,
    power_target: f64,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    Ok(empirical_radius_with(spec, n, prior, power_target, 100.0, &SimConfig::new(trials, seed))?.separation)
}

pub fn empirical_radius_with(
    spec: &NullSpec,
    n: u64,
    prior: PriorKind,
    power_target: f64,
    s_max: f64,
    cfg: &SimConfig,
) -> Result<RadiusReport> {
    if !(0.0..=1.0).contains(&power_target) {
        return Err(Error::OutOfRange(format!("power target {power_target} outside [0, 1]")));
    }
    let adv = Adversary::new(spec, n)?;
    adv.supports(prior)?;
    let (mut lo, mut hi) = match prior {
        PriorKind::TailSparse => tail_scale_range(&adv, n, spec)?,
        _ => (0.0, s_max),
    };
    hi = hi.min(s_max);
    if prior == PriorKind::SingleCoordinate {
        // A deterministic alternative has no scale to search.
        let at = estimate_type2_with(spec, n, prior, 1.0, cfg)?;
        let d = adv.single_coordinate()?;
        return Ok(RadiusReport {
            prior_kind: prior,
            power_target,
            scale: 1.0,
            separation: d.realized_separation,
            at_scale: at,
            iterations: 0,
        });
    }
    let mut at_hi = estimate_type2_with(spec, n, prior, hi, cfg)?;
    if at_hi.rate > power_target {
        return Err(Error::Bracket(format!(
            "type-II error {} at the largest scale {hi} exceeds the target {power_target}",
            at_hi.rate
        )));
    }
    for _ in 0..RADIUS_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let r = estimate_type2_with(spec, n, prior, mid, cfg)?;
        if r.rate <= power_target {
            hi = mid;
            at_hi = r;
        } else {
            lo = mid;
        }
    }
    let separation = mean_separation(&adv, spec, prior, hi, cfg.seed)?;
    Ok(RadiusReport {
        prior_kind: prior,
        power_target,
        scale: hi,
        separation,
        at_scale: at_hi,
        iterations: RADIUS_ITERATIONS,
    })
}

/// Scales at which the tail prior is defined: every `π_i ≤ 1` needs
/// `s ≥ n² p_U ‖p_{≥U}‖₁ / c_u`, and outside the Poisson model `π̄ ≤ 1`
/// needs `s ≤ n² ‖p_{≥U}‖₁ / c_u`.
fn tail_scale_range(adv: &Adversary, n: u64, spec: &NullSpec) -> Result<(f64, f64)> {
    let prof = adv.profile();
    let u = prof.u.ok_or_else(|| Error::PriorUndefined("tail prior needs U".into()))?;
    let mass = prof.mass_ge_u.unwrap_or(0.0);
    let n2 = (n as f64).powi(2);
    let c_u = spec.constants().c_u;
    let p_u = adv.canonical().effective()[u - 1];
    let lo = n2 * p_u * mass / c_u;
    let hi = if spec.model() == ModelKind::Poisson {
        f64::INFINITY
    } else {
        n2 * mass / c_u
    };
    Ok((lo, hi))
}

fn mean_separation(adv: &Adversary, spec: &NullSpec, prior: PriorKind, scale: f64, seed: u64) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..SEPARATION_DRAWS {
        let mut rng = trial_rng(seed ^ 0x5EBA_5A7E, i);
        let d = adv.draw(prior, scale, &mut rng)?;
        total += lt_distance(spec.p(), &d.q, spec.t());
    }
    Ok(total / SEPARATION_DRAWS as f64)
}

/// One output row of `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub n: u64,
    #[serde(rename = "N")]
    pub dim: usize,
    pub t: f64,
    pub eta: f64,
    pub kind: String,
    pub scale: f64,
    pub trials: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl RiskRow {
    /// `kind` is `type1` or the prior name.
    pub fn new(spec: &NullSpec, n: u64, kind: impl Into<String>, scale: f64, r: &RiskReport) -> Self {
        RiskRow {
            n,
            dim: spec.dim(),
            t: spec.t(),
            eta: spec.eta(),
            kind: kind.into(),
            scale,
            trials: r.trials,
            rate: r.rate,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            seed: r.seed,
        }
    }
}

pub fn write_rows<W: std::io::Write>(rows: &[RiskRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

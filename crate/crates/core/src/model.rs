//! Domain types and the canonical view of the null.
//!
//! The canonical view flips Binomial coordinates above one half to `1 − p`,
//! then sorts in nonincreasing order (stable in the original index). All
//! statistics, indices and priors work in canonical order; [`CanonicalNull`]
//! carries what is needed to map vectors back and forth.

use std::path::Path;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Binomial,
    Poisson,
    Multinomial,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Binomial => "binomial",
            ModelKind::Poisson => "poisson",
            ModelKind::Multinomial => "multinomial",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binomial" => Ok(ModelKind::Binomial),
            "poisson" => Ok(ModelKind::Poisson),
            "multinomial" => Ok(ModelKind::Multinomial),
            other => Err(Error::Parse(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Every tuning constant used by the tests and the priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantLedger {
    /// Threshold multiplier shared by the bulk and tail-mass tests.
    pub uc: f64,
    #[serde(rename = "c_I")]
    pub c_i: f64,
    /// The fourth power of the bulk cut constant.
    #[serde(rename = "c_A4")]
    pub c_a4: f64,
    pub c_u: f64,
    pub c_gamma: f64,
    #[serde(rename = "C_eta_frob")]
    pub c_eta_frob: f64,
}

impl ConstantLedger {
    pub fn defaults(eta: f64) -> Self {
        let c_a4 = (1.0 + 4.0 * (1.0 - eta).powi(2)).ln();
        let c_u = (eta / 10.0).min((1.0 - eta).powi(2) / 2.0);
        ConstantLedger {
            uc: 4.0 / eta.sqrt(),
            c_i: c_u / 2.0,
            c_a4,
            c_u,
            // Half the feasibility budget: keeps the χ² certificate below
            // 4(1−η)² even when some p_i sits at one half.
            c_gamma: (c_a4 / 2.0).powf(0.25),
            // Always 1/4 for η < 1. The Chebyshev bound on the ℓ₂ test needs
            // 2/√η; pass that through `with_overrides` for a level-η test.
            c_eta_frob: (2.0 / eta.sqrt()).min(0.25),
        }
    }

    /// `c_A = c_A4^{1/4}`.
    pub fn c_a(&self) -> f64 {
        self.c_a4.powf(0.25)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("uc", self.uc),
            ("c_I", self.c_i),
            ("c_A4", self.c_a4),
            ("c_u", self.c_u),
            ("c_gamma", self.c_gamma),
            ("C_eta_frob", self.c_eta_frob),
        ];
        for (name, v) in named {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidConstants(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if self.c_i > self.c_u {
            return Err(Error::InvalidConstants(format!(
                "c_I ({}) must not exceed c_u ({})",
                self.c_i, self.c_u
            )));
        }
        Ok(())
    }

    pub fn with_overrides(mut self, o: &ConstantOverrides) -> Self {
        if let Some(v) = o.uc {
            self.uc = v;
        }
        if let Some(v) = o.c_i {
            self.c_i = v;
        }
        if let Some(v) = o.c_a4 {
            self.c_a4 = v;
        }
        if let Some(v) = o.c_u {
            self.c_u = v;
        }
        if let Some(v) = o.c_gamma {
            self.c_gamma = v;
        }
        if let Some(v) = o.c_eta_frob {
            self.c_eta_frob = v;
        }
        self
    }
}

/// Partial constant overrides as they appear in spec files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uc: Option<f64>,
    #[serde(default, rename = "c_I", skip_serializing_if = "Option::is_none")]
    pub c_i: Option<f64>,
    #[serde(default, rename = "c_A4", skip_serializing_if = "Option::is_none")]
    pub c_a4: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_gamma: Option<f64>,
    #[serde(default, rename = "C_eta_frob", skip_serializing_if = "Option::is_none")]
    pub c_eta_frob: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NullSpecFile {
    model: ModelKind,
    p: Vec<f64>,
    eta: f64,
    t: f64,
    #[serde(default)]
    constants: Option<ConstantOverrides>,
}

/// The known null `p` together with the risk level, norm and constants.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSpec {
    model: ModelKind,
    p: Vec<f64>,
    eta: f64,
    t: f64,
    constants: ConstantLedger,
}

impl NullSpec {
    /// Builds a spec with the default constants for `eta`.
    pub fn new(model: ModelKind, p: Vec<f64>, eta: f64, t: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidSpec(format!("eta must lie in (0, 1), got {eta}")));
        }
        Self::with_constants(model, p, eta, t, ConstantLedger::defaults(eta))
    }

    pub fn with_constants(
        model: ModelKind,
        p: Vec<f64>,
        eta: f64,
        t: f64,
        constants: ConstantLedger,
    ) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidSpec(format!("eta must lie in (0, 1), got {eta}")));
        }
        if !(1.0..=2.0).contains(&t) {
            return Err(Error::ExponentOutOfRange(t));
        }
        validate_p(model, &p)?;
        constants.validate()?;
        Ok(NullSpec {
            model,
            p,
            eta,
            t,
            constants,
        })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn constants(&self) -> &ConstantLedger {
        &self.constants
    }

    /// Same null, different `t`.
    pub fn with_t(&self, t: f64) -> Result<Self> {
        Self::with_constants(self.model, self.p.clone(), self.eta, t, self.constants)
    }

    pub fn with_ledger(&self, constants: ConstantLedger) -> Result<Self> {
        Self::with_constants(self.model, self.p.clone(), self.eta, self.t, constants)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: NullSpecFile = serde_json::from_str(s)?;
        if !(f.eta > 0.0 && f.eta < 1.0) {
            return Err(Error::InvalidSpec(format!("eta must lie in (0, 1), got {}", f.eta)));
        }
        let mut ledger = ConstantLedger::defaults(f.eta);
        if let Some(o) = &f.constants {
            ledger = ledger.with_overrides(o);
        }
        Self::with_constants(f.model, f.p, f.eta, f.t, ledger)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Serializes with every constant written out, so the file is
    /// self-describing.
    pub fn to_json(&self) -> Result<String> {
        let c = self.constants;
        let f = NullSpecFile {
            model: self.model,
            p: self.p.clone(),
            eta: self.eta,
            t: self.t,
            constants: Some(ConstantOverrides {
                uc: Some(c.uc),
                c_i: Some(c.c_i),
                c_a4: Some(c.c_a4),
                c_u: Some(c.c_u),
                c_gamma: Some(c.c_gamma),
                c_eta_frob: Some(c.c_eta_frob),
            }),
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }
}

fn validate_p(model: ModelKind, p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidSpec("p must have at least one coordinate".into()));
    }
    for (j, &v) in p.iter().enumerate() {
        if v.is_nan() {
            return Err(Error::InvalidSpec(format!("p[{j}] is NaN")));
        }
        if !v.is_finite() {
            return Err(Error::InvalidSpec(format!("p[{j}] is not finite")));
        }
        if v < 0.0 {
            return Err(Error::InvalidSpec(format!("p[{j}] = {v} is negative")));
        }
        if model == ModelKind::Binomial && v > 1.0 {
            return Err(Error::InvalidSpec(format!(
                "binomial p[{j}] = {v} exceeds 1"
            )));
        }
    }
    if model == ModelKind::Multinomial {
        if p.len() < 2 {
            return Err(Error::InvalidSpec(
                "multinomial null needs at least two categories".into(),
            ));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "multinomial p sums to {total}, not 1 within 1e-12"
            )));
        }
    }
    Ok(())
}

/// Flipped and sorted view of a null.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalNull {
    pub model: ModelKind,
    /// Nonincreasing.
    pub p_sorted: Vec<f64>,
    /// `perm[s]` is the original index of the coordinate at sorted position `s`.
    pub perm: Vec<usize>,
    /// Indexed by original coordinate.
    pub flip_mask: Vec<bool>,
}

pub fn canonicalize(spec: &NullSpec) -> CanonicalNull {
    canonicalize_vec(spec.model(), spec.p())
}

/// Canonicalizes a raw parameter vector. Validation is the caller's job.
pub fn canonicalize_vec(model: ModelKind, p: &[f64]) -> CanonicalNull {
    let flip_mask: Vec<bool> = p
        .iter()
        .map(|&v| model == ModelKind::Binomial && v > 0.5)
        .collect();
    let flipped: Vec<f64> = p
        .iter()
        .zip(&flip_mask)
        .map(|(&v, &f)| if f { 1.0 - v } else { v })
        .collect();
    let mut perm: Vec<usize> = (0..p.len()).collect();
    // sort_by is stable, so ties keep the original order.
    perm.sort_by(|&a, &b| flipped[b].total_cmp(&flipped[a]));
    let p_sorted = perm.iter().map(|&j| flipped[j]).collect();
    CanonicalNull {
        model,
        p_sorted,
        perm,
        flip_mask,
    }
}

impl CanonicalNull {
    pub fn dim(&self) -> usize {
        self.p_sorted.len()
    }

    /// Number of leading canonical coordinates ignored by the statistics:
    /// the largest category of a multinomial null.
    pub fn effective_offset(&self) -> usize {
        match self.model {
            ModelKind::Multinomial => 1,
            _ => 0,
        }
    }

    /// The coordinates the indices and statistics act on.
    pub fn effective(&self) -> &[f64] {
        &self.p_sorted[self.effective_offset()..]
    }

    /// Reconstructs the original `p`.
    pub fn restore(&self) -> Vec<f64> {
        self.to_original(&self.p_sorted)
    }

    /// Maps a vector in original order (same model) to canonical order,
    /// applying the flips of the null.
    pub fn to_canonical(&self, q: &[f64]) -> Vec<f64> {
        self.perm
            .iter()
            .map(|&j| if self.flip_mask[j] { 1.0 - q[j] } else { q[j] })
            .collect()
    }

    /// Inverse of [`CanonicalNull::to_canonical`].
    pub fn to_original(&self, q_canonical: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; q_canonical.len()];
        for (s, &j) in self.perm.iter().enumerate() {
            let v = q_canonical[s];
            out[j] = if self.flip_mask[j] { 1.0 - v } else { v };
        }
        out
    }

    /// Maps per-coordinate counts from original to canonical order; flipped
    /// coordinates become `rows − count`.
    pub(crate) fn counts_to_canonical(&self, counts: &[u64], rows: u64) -> Vec<u64> {
        self.perm
            .iter()
            .map(|&j| {
                if self.flip_mask[j] {
                    rows - counts[j]
                } else {
                    counts[j]
                }
            })
            .collect()
    }

    /// Inverse of [`CanonicalNull::counts_to_canonical`].
    pub fn counts_to_original(&self, counts: &[u64], rows: u64) -> Vec<u64> {
        let mut out = vec![0; counts.len()];
        for (s, &j) in self.perm.iter().enumerate() {
            out[j] = if self.flip_mask[j] {
                rows - counts[s]
            } else {
                counts[s]
            };
        }
        out
    }
}

/// Sufficient statistics of `n` observations, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    pub n: u64,
    /// Size of each half, `⌊n/2⌋`.
    pub k: u64,
    /// Counts over all `n` observations.
    pub histogram: Vec<u64>,
    /// Counts over observations `1..=k`.
    pub s: Vec<u64>,
    /// Counts over observations `k+1..=2k`.
    pub s_prime: Vec<u64>,
}

impl SampleSet {
    pub fn dim(&self) -> usize {
        self.histogram.len()
    }

    /// All-zero sample of size `n`.
    pub fn zeros(n: u64, dim: usize) -> Self {
        SampleSet {
            n,
            k: n / 2,
            histogram: vec![0; dim],
            s: vec![0; dim],
            s_prime: vec![0; dim],
        }
    }
}

/// Observations in original coordinate order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawSamples {
    /// One 0/1 vector per observation.
    Bernoulli(Vec<Vec<u8>>),
    /// One count vector per observation.
    Counts(Vec<Vec<u64>>),
    /// One 0-based category per observation.
    Categories(Vec<usize>),
    /// Totals only; the split halves are drawn at random on ingestion.
    Histogram { n: u64, counts: Vec<u64> },
}

impl RawSamples {
    pub fn n(&self) -> u64 {
        match self {
            RawSamples::Bernoulli(r) => r.len() as u64,
            RawSamples::Counts(r) => r.len() as u64,
            RawSamples::Categories(c) => c.len() as u64,
            RawSamples::Histogram { n, .. } => *n,
        }
    }

    /// Reads a sample file. Rows starting with `#` are comments. A row whose
    /// first field is `H` is a histogram row `H,n,c_1,...,c_N`; otherwise
    /// each row is one observation, whose shape depends on `kind`.
    pub fn from_csv_reader<R: std::io::Read>(rdr: R, kind: ModelKind) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(rdr);
        let mut rows: Vec<Vec<String>> = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            rows.push(rec.iter().map(str::to_owned).collect());
        }
        if let Some(first) = rows.first() {
            if first[0].eq_ignore_ascii_case("h") {
                if rows.len() != 1 {
                    return Err(Error::Parse(
                        "a histogram file must contain a single H row".into(),
                    ));
                }
                if first.len() < 2 {
                    return Err(Error::Parse("histogram row is missing n".into()));
                }
                let n = parse_u64(&first[1])?;
                let counts = first[2..]
                    .iter()
                    .map(|s| parse_u64(s))
                    .collect::<Result<Vec<_>>>()?;
                return Ok(RawSamples::Histogram { n, counts });
            }
        }
        match kind {
            ModelKind::Binomial => {
                let mut out = Vec::with_capacity(rows.len());
                for (i, row) in rows.iter().enumerate() {
                    let mut v = Vec::with_capacity(row.len());
                    for f in row {
                        match f.as_str() {
                            "0" => v.push(0u8),
                            "1" => v.push(1u8),
                            other => {
                                return Err(Error::OutOfRange(format!(
                                    "row {}: binomial entries must be 0 or 1, got '{other}'",
                                    i + 1
                                )))
                            }
                        }
                    }
                    out.push(v);
                }
                Ok(RawSamples::Bernoulli(out))
            }
            ModelKind::Poisson => {
                let out = rows
                    .iter()
                    .map(|row| row.iter().map(|s| parse_u64(s)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                Ok(RawSamples::Counts(out))
            }
            ModelKind::Multinomial => {
                let mut out = Vec::with_capacity(rows.len());
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != 1 {
                        return Err(Error::Parse(format!(
                            "row {}: a multinomial observation is a single category index",
                            i + 1
                        )));
                    }
                    out.push(parse_u64(&row[0])? as usize);
                }
                Ok(RawSamples::Categories(out))
            }
        }
    }

    pub fn from_csv_path(path: impl AsRef<Path>, kind: ModelKind) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_csv_reader(f, kind)
    }

    /// Writes the file format read by [`RawSamples::from_csv_reader`].
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(w);
        match self {
            RawSamples::Bernoulli(rows) => {
                for r in rows {
                    wtr.write_record(r.iter().map(|v| v.to_string()))?;
                }
            }
            RawSamples::Counts(rows) => {
                for r in rows {
                    wtr.write_record(r.iter().map(|v| v.to_string()))?;
                }
            }
            RawSamples::Categories(c) => {
                for v in c {
                    wtr.write_record([v.to_string()])?;
                }
            }
            RawSamples::Histogram { n, counts } => {
                let mut rec = vec!["H".to_string(), n.to_string()];
                rec.extend(counts.iter().map(|v| v.to_string()));
                wtr.write_record(rec)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Per-coordinate totals in original order, without splitting.
    pub fn histogram(&self, kind: ModelKind, dim: usize) -> Result<Vec<u64>> {
        check_kind(self, kind)?;
        let mut h = vec![0u64; dim];
        match self {
            RawSamples::Bernoulli(rows) => {
                for r in rows {
                    check_len(r.len(), dim)?;
                    for (j, &v) in r.iter().enumerate() {
                        h[j] += v as u64;
                    }
                }
            }
            RawSamples::Counts(rows) => {
                for r in rows {
                    check_len(r.len(), dim)?;
                    for (j, &v) in r.iter().enumerate() {
                        h[j] += v;
                    }
                }
            }
            RawSamples::Categories(c) => {
                for &v in c {
                    if v >= dim {
                        return Err(Error::OutOfRange(format!(
                            "category {v} outside 0..{dim}"
                        )));
                    }
                    h[v] += 1;
                }
            }
            RawSamples::Histogram { counts, .. } => {
                check_len(counts.len(), dim)?;
                h.copy_from_slice(counts);
            }
        }
        Ok(h)
    }
}

fn parse_u64(s: &str) -> Result<u64> {
    s.parse::<u64>()
        .map_err(|_| Error::OutOfRange(format!("expected a nonnegative integer, got '{s}'")))
}

fn check_len(found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_kind(raw: &RawSamples, kind: ModelKind) -> Result<()> {
    let ok = matches!(
        (raw, kind),
        (RawSamples::Bernoulli(_), ModelKind::Binomial)
            | (RawSamples::Counts(_), ModelKind::Poisson)
            | (RawSamples::Categories(_), ModelKind::Multinomial)
            | (RawSamples::Histogram { .. }, _)
    );
    if ok {
        return Ok(());
    }
    let found = match raw {
        RawSamples::Bernoulli(_) => "bernoulli rows",
        RawSamples::Counts(_) => "count rows",
        RawSamples::Categories(_) => "category draws",
        RawSamples::Histogram { .. } => "a histogram",
    };
    Err(Error::WrongObservationKind { kind, found })
}

/// Reduces raw observations to a canonical [`SampleSet`].
///
/// For odd `n` the last observation counts towards the histogram only. For a
/// histogram input the halves are drawn from their exact conditional law
/// given the totals, which needs `rng`; row inputs never touch it.
pub fn ingest_samples<R: Rng + ?Sized>(
    raw: &RawSamples,
    canon: &CanonicalNull,
    rng: &mut R,
) -> Result<SampleSet> {
    let dim = canon.dim();
    let kind = canon.model;
    let histogram = raw.histogram(kind, dim)?;
    let n = raw.n();
    let k = n / 2;
    let (s, s_prime) = match raw {
        RawSamples::Bernoulli(rows) => {
            let sum = |rs: &[Vec<u8>]| {
                let mut acc = vec![0u64; dim];
                for r in rs {
                    for (j, &v) in r.iter().enumerate() {
                        acc[j] += v as u64;
                    }
                }
                acc
            };
            let k = k as usize;
            (sum(&rows[..k]), sum(&rows[k..2 * k]))
        }
        RawSamples::Counts(rows) => {
            let sum = |rs: &[Vec<u64>]| {
                let mut acc = vec![0u64; dim];
                for r in rs {
                    for (j, &v) in r.iter().enumerate() {
                        acc[j] += v;
                    }
                }
                acc
            };
            let k = k as usize;
            (sum(&rows[..k]), sum(&rows[k..2 * k]))
        }
        RawSamples::Categories(c) => {
            let sum = |cs: &[usize]| {
                let mut acc = vec![0u64; dim];
                for &v in cs {
                    acc[v] += 1;
                }
                acc
            };
            let k = k as usize;
            (sum(&c[..k]), sum(&c[k..2 * k]))
        }
        RawSamples::Histogram { n, counts } => split_histogram(kind, *n, counts, rng)?,
    };
    let rows_full = if kind == ModelKind::Binomial { n } else { 0 };
    let rows_half = if kind == ModelKind::Binomial { k } else { 0 };
    Ok(SampleSet {
        n,
        k,
        histogram: canon.counts_to_canonical(&histogram, rows_full),
        s: canon.counts_to_canonical(&s, rows_half),
        s_prime: canon.counts_to_canonical(&s_prime, rows_half),
    })
}

fn split_histogram<R: Rng + ?Sized>(
    kind: ModelKind,
    n: u64,
    counts: &[u64],
    rng: &mut R,
) -> Result<(Vec<u64>, Vec<u64>)> {
    let k = n / 2;
    let dim = counts.len();
    let mut s = vec![0u64; dim];
    let mut sp = vec![0u64; dim];
    let bad = |e: &dyn std::fmt::Display| Error::Internal(format!("split sampler: {e}"));
    match kind {
        ModelKind::Binomial => {
            for (j, &h) in counts.iter().enumerate() {
                if h > n {
                    return Err(Error::OutOfRange(format!(
                        "binomial count {h} at coordinate {j} exceeds n = {n}"
                    )));
                }
                s[j] = hypergeometric(n, h, k, rng).map_err(|e| bad(&e))?;
                sp[j] = hypergeometric(n - k, h - s[j], k, rng).map_err(|e| bad(&e))?;
            }
        }
        ModelKind::Poisson => {
            if n == 0 {
                if counts.iter().any(|&h| h > 0) {
                    return Err(Error::OutOfRange("nonzero counts with n = 0".into()));
                }
            } else {
                // Given the total over n iid rows, each unit lands in a
                // uniformly chosen row.
                let p1 = k as f64 / n as f64;
                let p2 = if n > k { k as f64 / (n - k) as f64 } else { 0.0 };
                for (j, &h) in counts.iter().enumerate() {
                    s[j] = Binomial::new(h, p1).map_err(|e| bad(&e))?.sample(rng);
                    sp[j] = Binomial::new(h - s[j], p2.min(1.0))
                        .map_err(|e| bad(&e))?
                        .sample(rng);
                }
            }
        }
        ModelKind::Multinomial => {
            let total: u64 = counts.iter().sum();
            if total != n {
                return Err(Error::OutOfRange(format!(
                    "multinomial histogram sums to {total}, expected n = {n}"
                )));
            }
            multivariate_hypergeometric(counts, k, &mut s, rng).map_err(|e| bad(&e))?;
            let rest: Vec<u64> = counts.iter().zip(&s).map(|(h, a)| h - a).collect();
            multivariate_hypergeometric(&rest, k, &mut sp, rng).map_err(|e| bad(&e))?;
        }
    }
    Ok((s, sp))
}

fn hypergeometric<R: Rng + ?Sized>(
    population: u64,
    successes: u64,
    draws: u64,
    rng: &mut R,
) -> std::result::Result<u64, rand_distr::HyperGeoError> {
    if draws == 0 || successes == 0 {
        return Ok(0);
    }
    if successes == population {
        return Ok(draws);
    }
    Ok(Hypergeometric::new(population, successes, draws)?.sample(rng))
}

fn multivariate_hypergeometric<R: Rng + ?Sized>(
    counts: &[u64],
    draws: u64,
    out: &mut [u64],
    rng: &mut R,
) -> std::result::Result<(), rand_distr::HyperGeoError> {
    let mut remaining_pop: u64 = counts.iter().sum();
    let mut remaining = draws;
    for (j, &c) in counts.iter().enumerate() {
        if remaining == 0 {
            out[j] = 0;
            continue;
        }
        let x = hypergeometric(remaining_pop, c, remaining, rng)?;
        out[j] = x;
        remaining -= x;
        remaining_pop -= c;
    }
    Ok(())
}

/// Exponents and cut indices, with the partial sums they induce. Indices are
/// 1-based cut positions over the effective coordinates: `a` means the bulk is
/// effective coordinates `1..=a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexProfile {
    pub r: f64,
    pub b: f64,
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "A")]
    pub a: usize,
    #[serde(rename = "U")]
    pub u: Option<usize>,
    /// Number of effective coordinates.
    pub dim: usize,
    /// `Σ_{i≤I} p_i^r`.
    pub sum_r_le_i: f64,
    /// `Σ_{i≤A} p_i^r`.
    pub sum_r_le_a: f64,
    /// `Σ_{i>I} p_i`.
    pub mass_gt_i: f64,
    /// `Σ_{i>A} p_i`.
    pub mass_gt_a: f64,
    /// `Σ_{i>A} p_i²`.
    pub sq_gt_a: f64,
    /// `Σ_{i≥U} p_i` when `U` exists.
    pub mass_ge_u: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub bulk_term: f64,
    pub tail_term: f64,
    pub inv_n_term: f64,
    pub total: f64,
}

/// Which bulk statistic drives `decide_bulk`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BulkVariant {
    #[default]
    Split,
    /// No-split statistic with the `− H_j` correction as printed.
    NoSplitPrinted,
    /// No-split statistic with a `− H_j/n²` correction.
    NoSplitNormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub t_bulk: f64,
    pub t1: f64,
    pub collision_found: bool,
    pub thr_bulk: f64,
    pub thr_t1: f64,
    pub decide_bulk: bool,
    pub decide_t1: bool,
    pub decide_psi2: bool,
    pub decide_aggregate: bool,
    pub bulk_variant: BulkVariant,
    /// Tail χ² statistic, when enabled.
    pub t2: Option<f64>,
    pub thr_t2: Option<f64>,
    pub decide_t2: bool,
    /// An observation fell on a coordinate the null gives zero mass.
    pub impossible_under_null: bool,
    pub reason: Option<String>,
    pub profile: IndexProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    BulkRademacher,
    TailSparse,
    SingleCoordinate,
}

impl std::str::FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bulk" | "bulk_rademacher" => Ok(PriorKind::BulkRademacher),
            "tail" | "tail_sparse" => Ok(PriorKind::TailSparse),
            "single" | "single_coordinate" => Ok(PriorKind::SingleCoordinate),
            other => Err(Error::Parse(format!("unknown prior kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for PriorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PriorKind::BulkRademacher => "bulk",
            PriorKind::TailSparse => "tail",
            PriorKind::SingleCoordinate => "single",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialDraw {
    /// The alternative in original coordinate order.
    pub q: Vec<f64>,
    /// The same alternative in the canonical order of the null.
    pub q_canonical: Vec<f64>,
    pub prior_kind: PriorKind,
    pub scale: f64,
    /// `‖p − q‖_t` over all coordinates.
    pub realized_separation: f64,
}

/// `‖x − y‖_t`.
pub fn lt_distance(x: &[f64], y: &[f64], t: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs().powf(t))
        .sum::<f64>()
        .powf(1.0 / t)
}

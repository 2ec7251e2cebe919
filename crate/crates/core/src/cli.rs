//! The `minitest` command line.
//!
//! Structured results are written as JSON and simulation tables as CSV; every
//! output carries a `metadata` block (CSV outputs as leading `#` lines) with
//! the version, seed, resolved parameters, the null specification and the
//! constants, so a run can be replayed from its output alone.
//!
//! `--config FILE` supplies defaults for any flag as a flat JSON object keyed
//! by flag name (`"n": 100`, `"power-target": 0.1`); flags given on the command
//! line take precedence. Exit status is 0 on success, 1 on a domain error and
//! 2 on a usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::adversary::{chi2_cosh_bound, chi2_divergence_closed_form, Adversary};
use crate::error::Error;
use crate::model::{canonicalize, ingest_samples, BulkVariant, ModelKind, NullSpec, PriorKind, RawSamples};
use crate::montecarlo::{
    empirical_radius_with, estimate_type1_with, estimate_type2_with, write_rows, RiskRow, SimConfig,
};
use crate::oracle::run_battery;
use crate::rates::{
    fixed_point_bounds, frobenius_rate, index_profile_for, lower_bound_rate, minimax_rate_with, TailCut,
};
use crate::sampling::{
    binomial_to_poisson_subsample, draw_observations, poisson_to_bernoulli_stream, poissonize_binomial,
    poissonize_multinomial, solve_c, solve_c_bar, trial_rng, Reduction,
};
use crate::statistics::{frobenius_test, PreparedTest, TestOptions};

#[derive(Debug, Parser)]
#[command(name = "minitest", version, about = "Locally minimax identity testing for discrete models")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (falls back to MINITEST_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON file of default flag values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Local minimax separation radius and its three terms.
    Rate(RateArgs),
    /// Exponents, cut indices and partial sums.
    Indices(SpecN),
    /// Fixed-point upper and lower radii next to the local rate.
    BoundsCompare(BoundsArgs),
    /// Draw observations from p (or from q).
    Sample(SampleArgs),
    /// Poissonized draws and the Poisson/Bernoulli reductions.
    Poissonize(PoissonizeArgs),
    /// Run the aggregate test on observed data.
    Test(TestArgs),
    /// Draw an alternative from a lower-bound prior.
    Adversary(AdversaryArgs),
    /// Monte Carlo type-I and type-II error.
    Simulate(SimulateArgs),
    /// Empirical separation radius by bisection over the prior scale.
    Radius(RadiusArgs),
    /// Cross-check closed forms against brute-force enumeration.
    OracleCheck,
}

#[derive(Debug, Args)]
struct SpecN {
    /// Null specification (JSON).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Sample size.
    #[arg(long)]
    n: Option<u64>,
}

#[derive(Debug, Args)]
struct RateArgs {
    #[command(flatten)]
    base: SpecN,
    /// Symmetric edge-probability matrix (JSON array of rows); gives the
    /// Frobenius-norm rate instead of a spec.
    #[arg(long, conflicts_with = "spec")]
    matrix: Option<PathBuf>,
    /// Cut beyond which the tail term is taken: i or a.
    #[arg(long)]
    cut: Option<String>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    base: SpecN,
    /// Constant C of the upper fixed point.
    #[arg(long)]
    c_upper: Option<f64>,
    /// Constant c of the lower fixed point.
    #[arg(long)]
    c_lower: Option<f64>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    base: SpecN,
    /// Draw from this parameter vector (JSON array) instead of p.
    #[arg(long)]
    q: Option<PathBuf>,
    /// Write a single histogram row instead of one row per observation.
    #[arg(long)]
    histogram: bool,
}

#[derive(Debug, Args)]
struct PoissonizeArgs {
    #[command(flatten)]
    base: SpecN,
    /// multinomial, binomial, poisson-to-bernoulli or binomial-to-poisson.
    #[arg(long)]
    mode: Option<String>,
    /// Input observations for the two reductions.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Truncation factor; solved from η when absent.
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Debug, Args)]
struct TestArgs {
    /// Null specification (JSON).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Observations (CSV).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Bulk statistic: split, no_split_printed or no_split_normalized.
    #[arg(long)]
    variant: Option<String>,
    /// Also run the tail χ² test.
    #[arg(long)]
    t2: bool,
    /// Do not reject outright on observations the null cannot produce.
    #[arg(long)]
    lenient: bool,
    /// At t = 2 keep the I/A split instead of one χ² over all coordinates.
    #[arg(long)]
    split_l2: bool,
    /// Also run the Frobenius-calibrated test over all coordinates.
    #[arg(long)]
    frobenius: bool,
}

#[derive(Debug, Args)]
struct AdversaryArgs {
    #[command(flatten)]
    base: SpecN,
    /// bulk, tail or single.
    #[arg(long)]
    kind: Option<String>,
    /// Multiplies γ (bulk) or π̄ (tail).
    #[arg(long)]
    scale: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Null specification (JSON).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<u64>>,
    /// type1, bulk, tail or single.
    #[arg(long)]
    kind: Option<String>,
    /// Prior scales, comma separated.
    #[arg(long, value_delimiter = ',')]
    scale: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Debug, Args)]
struct RadiusArgs {
    #[command(flatten)]
    base: SpecN,
    /// bulk, tail or single.
    #[arg(long)]
    kind: Option<String>,
    /// Largest acceptable type-II error (defaults to η/2).
    #[arg(long)]
    power_target: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Upper end of the scale search.
    #[arg(long)]
    s_max: Option<f64>,
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Flag defaults read from `--config`.
struct Config(Map<String, Value>);

impl Config {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Config(Map::new()));
        };
        let text = std::fs::read_to_string(path).map_err(Error::from)?;
        match serde_json::from_str::<Value>(&text).map_err(Error::from)? {
            Value::Object(m) => Ok(Config(
                m.into_iter().map(|(k, v)| (k.replace('_', "-"), v)).collect(),
            )),
            _ => Err(Failure::Usage("--config must hold a JSON object".into())),
        }
    }

    fn pick<T: DeserializeOwned>(&self, cli: Option<T>, key: &str) -> CliResult<Option<T>> {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| Failure::Usage(format!("config key '{key}': {e}"))),
        }
    }

    fn need<T: DeserializeOwned>(&self, cli: Option<T>, key: &str) -> CliResult<T> {
        self.pick(cli, key)?
            .ok_or_else(|| Failure::Usage(format!("missing required --{key}")))
    }

    fn flag(&self, cli: bool, key: &str) -> CliResult<bool> {
        Ok(cli || self.pick(None, key)?.unwrap_or(false))
    }
}

struct Ctx {
    seed: u64,
    threads: Option<usize>,
    out: Option<PathBuf>,
    cfg: Config,
    command: &'static str,
}

impl Ctx {
    fn metadata(&self, spec: Option<&NullSpec>, params: Value) -> CliResult<Value> {
        let mut m = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": self.seed,
            "threads": self.threads,
            "params": params,
        });
        if let Some(s) = spec {
            m["spec"] = serde_json::from_str(&s.to_json()?).map_err(Error::from)?;
            m["constants"] = serde_json::to_value(s.constants()).map_err(Error::from)?;
        }
        Ok(m)
    }

    fn emit_json(&self, body: Value) -> CliResult<()> {
        let text = serde_json::to_string_pretty(&body).map_err(Error::from)? + "\n";
        self.write(text.as_bytes())
    }

    fn write(&self, bytes: &[u8]) -> CliResult<()> {
        match &self.out {
            Some(p) => std::fs::write(p, bytes).map_err(Error::from)?,
            None => std::io::stdout().write_all(bytes).map_err(Error::from)?,
        }
        Ok(())
    }

    /// CSV body preceded by the metadata block as `#` comment lines.
    fn emit_csv(&self, meta: &Value, body: &[u8]) -> CliResult<()> {
        let mut buf = Vec::new();
        for line in serde_json::to_string_pretty(meta).map_err(Error::from)?.lines() {
            buf.extend_from_slice(b"# ");
            buf.extend_from_slice(line.as_bytes());
            buf.push(b'\n');
        }
        buf.extend_from_slice(body);
        self.write(&buf)
    }

    fn spec(&self, cli: Option<PathBuf>) -> CliResult<NullSpec> {
        let path: PathBuf = self.cfg.need(cli, "spec")?;
        Ok(NullSpec::from_path(path)?)
    }

    fn sim_config(&self, trials: u64) -> SimConfig {
        SimConfig {
            trials,
            seed: self.seed,
            threads: self.threads,
            test: TestOptions::default(),
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    Ok(serde_json::to_value(v).map_err(Error::from)?)
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> CliResult<T> {
    s.parse().map_err(|e: Error| Failure::Usage(e.to_string()))
}

/// Runs the command line `args` (program name first) and returns the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    let command = match &cli.command {
        Command::Rate(_) => "rate",
        Command::Indices(_) => "indices",
        Command::BoundsCompare(_) => "bounds-compare",
        Command::Sample(_) => "sample",
        Command::Poissonize(_) => "poissonize",
        Command::Test(_) => "test",
        Command::Adversary(_) => "adversary",
        Command::Simulate(_) => "simulate",
        Command::Radius(_) => "radius",
        Command::OracleCheck => "oracle-check",
    };
    let ctx = Ctx {
        seed: cfg.pick(cli.seed, "seed")?.unwrap_or(0),
        threads: cfg.pick(cli.threads, "threads")?,
        out: cfg.pick(cli.out, "out")?,
        cfg,
        command,
    };
    match cli.command {
        Command::Rate(a) => rate(&ctx, a),
        Command::Indices(a) => indices(&ctx, a),
        Command::BoundsCompare(a) => bounds_compare(&ctx, a),
        Command::Sample(a) => sample(&ctx, a),
        Command::Poissonize(a) => poissonize(&ctx, a),
        Command::Test(a) => test(&ctx, a),
        Command::Adversary(a) => adversary(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Radius(a) => radius(&ctx, a),
        Command::OracleCheck => oracle_check(&ctx),
    }
}

fn rate(ctx: &Ctx, a: RateArgs) -> CliResult<()> {
    let n: u64 = ctx.cfg.need(a.base.n, "n")?;
    if let Some(path) = ctx.cfg.pick(a.matrix, "matrix")? {
        let path: PathBuf = path;
        let text = std::fs::read_to_string(&path).map_err(Error::from)?;
        let m: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(Error::from)?;
        let total = frobenius_rate(&m, n)?;
        let meta = ctx.metadata(None, json!({ "n": n, "matrix": path }))?;
        return ctx.emit_json(json!({ "metadata": meta, "frobenius_rate": total }));
    }
    let spec = ctx.spec(a.base.spec)?;
    let cut = match ctx.cfg.pick(a.cut, "cut")?.as_deref() {
        None | Some("i") | Some("I") => TailCut::I,
        Some("a") | Some("A") => TailCut::A,
        Some(other) => return Err(Failure::Usage(format!("--cut must be i or a, got '{other}'"))),
    };
    let r = minimax_rate_with(&spec, n, cut)?;
    let lb = lower_bound_rate(&spec, n)?;
    let profile = index_profile_for(&spec, n)?;
    let meta = ctx.metadata(Some(&spec), json!({ "n": n, "cut": cut }))?;
    ctx.emit_json(json!({
        "metadata": meta,
        "rate": r,
        "lower_bound_form": lb,
        "profile": profile,
    }))
}

fn indices(ctx: &Ctx, a: SpecN) -> CliResult<()> {
    let n: u64 = ctx.cfg.need(a.n, "n")?;
    let spec = ctx.spec(a.spec)?;
    let profile = index_profile_for(&spec, n)?;
    let meta = ctx.metadata(Some(&spec), json!({ "n": n }))?;
    ctx.emit_json(json!({ "metadata": meta, "profile": profile }))
}

fn bounds_compare(ctx: &Ctx, a: BoundsArgs) -> CliResult<()> {
    let n: u64 = ctx.cfg.need(a.base.n, "n")?;
    let spec = ctx.spec(a.base.spec)?;
    let c_upper = ctx.cfg.pick(a.c_upper, "c-upper")?.unwrap_or(1.0);
    let c_lower = ctx.cfg.pick(a.c_lower, "c-lower")?.unwrap_or(1.0);
    let fp = fixed_point_bounds(spec.p(), n, c_upper, c_lower)?;
    let r = minimax_rate_with(&spec, n, TailCut::I)?;
    let meta = ctx.metadata(Some(&spec), json!({ "n": n, "c_upper": c_upper, "c_lower": c_lower }))?;
    ctx.emit_json(json!({
        "metadata": meta,
        "eps_plus": fp.eps_plus,
        "eps_minus": fp.eps_minus,
        "ratio": fp.ratio,
        "bounds_match": fp.bounds_match,
        "first_case": fp.first_case,
        "iterations_plus": fp.iterations_plus,
        "iterations_minus": fp.iterations_minus,
        "local_rate": r,
    }))
}

fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    let v: Value = serde_json::from_str(&text).map_err(Error::from)?;
    // Either a bare array or an adversary output with a "q" field.
    let arr = v.get("draw").and_then(|d| d.get("q")).or_else(|| v.get("q")).unwrap_or(&v);
    Ok(serde_json::from_value(arr.clone()).map_err(Error::from)?)
}

fn sample(ctx: &Ctx, a: SampleArgs) -> CliResult<()> {
    let n: u64 = ctx.cfg.need(a.base.n, "n")?;
    let spec = ctx.spec(a.base.spec)?;
    let q_path: Option<PathBuf> = ctx.cfg.pick(a.q, "q")?;
    let q = match &q_path {
        Some(p) => {
            let q = read_vector(p)?;
            if q.len() != spec.dim() {
                return Err(Error::DimensionMismatch {
                    expected: spec.dim(),
                    found: q.len(),
                }
                .into());
            }
            q
        }
        None => spec.p().to_vec(),
    };
    let histogram = ctx.cfg.flag(a.histogram, "histogram")?;
    let mut rng = trial_rng(ctx.seed, 0);
    let raw = draw_observations(spec.model(), &q, n, &mut rng)?;
    let raw = if histogram {
        RawSamples::Histogram {
            n,
            counts: raw.histogram(spec.model(), spec.dim())?,
        }
    } else {
        raw
    };
    let meta = ctx.metadata(Some(&spec), json!({ "n": n, "q": q_path, "histogram": histogram }))?;
    let mut body = Vec::new();
    raw.write_csv(&mut body)?;
    ctx.emit_csv(&meta, &body)
}

fn poissonize(ctx: &Ctx, a: PoissonizeArgs) -> CliResult<()> {
    let spec = ctx.spec(a.base.spec)?;
    let mode: String = ctx.cfg.need(a.mode, "mode")?;
    let mut rng = trial_rng(ctx.seed, 0);
    match mode.as_str() {
        "multinomial" | "binomial" => {
            let n: u64 = ctx.cfg.need(a.base.n, "n")?;
            let counts = if mode == "multinomial" {
                poissonize_multinomial(spec.p(), n, &mut rng)?
            } else {
                poissonize_binomial(spec.p(), n, &mut rng)?
            };
            let meta = ctx.metadata(Some(&spec), json!({ "n": n, "mode": mode }))?;
            ctx.emit_json(json!({ "metadata": meta, "histogram": counts }))
        }
        "poisson-to-bernoulli" | "binomial-to-poisson" => {
            let data: PathBuf = ctx.cfg.need(a.data, "data")?;
            let c_flag: Option<f64> = ctx.cfg.pick(a.c, "c")?;
            if mode == "poisson-to-bernoulli" {
                let raw = RawSamples::from_csv_path(&data, ModelKind::Poisson)?;
                let n = raw.n();
                let y = raw.histogram(ModelKind::Poisson, spec.dim())?;
                let c = match c_flag {
                    Some(c) => c,
                    None => solve_c(n, spec.eta())?,
                };
                let meta = ctx.metadata(Some(&spec), json!({ "mode": mode, "data": data, "n": n, "c": c }))?;
                match poisson_to_bernoulli_stream(&y, n, c, &mut rng)? {
                    Reduction::Ok(rows) => {
                        let mut body = Vec::new();
                        RawSamples::Bernoulli(rows).write_csv(&mut body)?;
                        ctx.emit_csv(&meta, &body)
                    }
                    Reduction::Failed(f) => reduction_failed(ctx, meta, &f),
                }
            } else {
                let raw = RawSamples::from_csv_path(&data, ModelKind::Binomial)?;
                let RawSamples::Bernoulli(rows) = raw else {
                    return Err(Error::Parse("binomial-to-poisson needs one 0/1 row per observation".into()).into());
                };
                let n = rows.len() as u64;
                let c_bar = match c_flag {
                    Some(c) => c,
                    None => solve_c_bar(n, spec.eta())?,
                };
                let meta = ctx.metadata(Some(&spec), json!({ "mode": mode, "data": data, "n": n, "c_bar": c_bar }))?;
                match binomial_to_poisson_subsample(&rows, c_bar, &mut rng)? {
                    Reduction::Ok(sub) => {
                        let mut body = Vec::new();
                        RawSamples::Counts(sub.rows).write_csv(&mut body)?;
                        ctx.emit_csv(&meta, &body)
                    }
                    Reduction::Failed(f) => reduction_failed(ctx, meta, &f),
                }
            }
        }
        other => Err(Failure::Usage(format!(
            "--mode must be multinomial, binomial, poisson-to-bernoulli or binomial-to-poisson, got '{other}'"
        ))),
    }
}

fn reduction_failed(ctx: &Ctx, meta: Value, f: &crate::sampling::ReductionFailure) -> CliResult<()> {
    ctx.emit_json(json!({ "metadata": meta, "failure": f }))?;
    Err(Error::Infeasible(format!("reduction failed: {f:?}")).into())
}

fn test(ctx: &Ctx, a: TestArgs) -> CliResult<()> {
    let spec = ctx.spec(a.spec)?;
    let data: PathBuf = ctx.cfg.need(a.data, "data")?;
    let bulk_variant = match ctx.cfg.pick(a.variant, "variant")?.as_deref() {
        None | Some("split") => BulkVariant::Split,
        Some("no_split_printed") | Some("no-split-printed") => BulkVariant::NoSplitPrinted,
        Some("no_split_normalized") | Some("no-split-normalized") => BulkVariant::NoSplitNormalized,
        Some(other) => return Err(Failure::Usage(format!("unknown --variant '{other}'"))),
    };
    let opts = TestOptions {
        bulk_variant,
        include_t2: ctx.cfg.flag(a.t2, "t2")?,
        strict_impossible: !ctx.cfg.flag(a.lenient, "lenient")?,
        l2_single_chi2: !ctx.cfg.flag(a.split_l2, "split-l2")?,
    };
    let raw = RawSamples::from_csv_path(&data, spec.model())?;
    let canon = canonicalize(&spec);
    let mut rng = trial_rng(ctx.seed, 0);
    let sample = ingest_samples(&raw, &canon, &mut rng)?;
    let prepared = PreparedTest::new(&spec, sample.n, opts)?;
    let verdict = prepared.verdict(&sample)?;
    let meta = ctx.metadata(Some(&spec), json!({ "data": data, "n": sample.n, "options": opts }))?;
    let mut body = json!({ "metadata": meta, "verdict": verdict });
    if ctx.cfg.flag(a.frobenius, "frobenius")? {
        let (t2, thr, decide) = frobenius_test(&spec, &sample)?;
        body["frobenius"] = json!({ "t2": t2, "threshold": thr, "reject": decide });
    }
    ctx.emit_json(body)
}

fn adversary(ctx: &Ctx, a: AdversaryArgs) -> CliResult<()> {
    let n: u64 = ctx.cfg.need(a.base.n, "n")?;
    let spec = ctx.spec(a.base.spec)?;
    let kind: PriorKind = parse(&ctx.cfg.need::<String>(a.kind, "kind")?)?;
    let scale = ctx.cfg.pick(a.scale, "scale")?.unwrap_or(1.0);
    let adv = Adversary::new(&spec, n)?;
    let mut rng = trial_rng(ctx.seed, 0);
    let draw = adv.draw(kind, scale, &mut rng)?;
    let meta = ctx.metadata(Some(&spec), json!({ "n": n, "kind": kind, "scale": scale }))?;
    let mut body = json!({ "metadata": meta, "draw": draw, "profile": adv.profile() });
    if kind == PriorKind::BulkRademacher && spec.model() == ModelKind::Binomial {
        let gamma = adv.bulk_perturbation(scale)?;
        let p = &adv.canonical().effective()[..gamma.len()];
        body["chi2_certificate"] = json!({
            "closed_form": chi2_divergence_closed_form(p, &gamma, n)?,
            "cosh_bound": chi2_cosh_bound(p, &gamma, n)?,
            "limit": 4.0 * (1.0 - spec.eta()).powi(2),
        });
    }
    ctx.emit_json(body)
}

fn simulate(ctx: &Ctx, a: SimulateArgs) -> CliResult<()> {
    let spec = ctx.spec(a.spec)?;
    let ns: Vec<u64> = ctx.cfg.need(a.n, "n")?;
    let kind: String = ctx.cfg.pick(a.kind, "kind")?.unwrap_or_else(|| "type1".into());
    let scales: Vec<f64> = ctx.cfg.pick(a.scale, "scale")?.unwrap_or_else(|| vec![1.0]);
    let trials: u64 = ctx.cfg.pick(a.trials, "trials")?.unwrap_or(10_000);
    let prior = if kind == "type1" { None } else { Some(parse::<PriorKind>(&kind)?) };
    let cfg = ctx.sim_config(trials);
    let mut rows = Vec::new();
    for &n in &ns {
        match prior {
            None => {
                let r = estimate_type1_with(&spec, n, &cfg)?;
                rows.push(RiskRow::new(&spec, n, "type1", 0.0, &r));
            }
            Some(pk) => {
                for &s in &scales {
                    let r = estimate_type2_with(&spec, n, pk, s, &cfg)?;
                    rows.push(RiskRow::new(&spec, n, pk.to_string(), s, &r));
                }
            }
        }
    }
    let meta = ctx.metadata(
        Some(&spec),
        json!({ "n": ns, "kind": kind, "scale": scales, "trials": trials }),
    )?;
    let mut body = Vec::new();
    write_rows(&rows, &mut body)?;
    ctx.emit_csv(&meta, &body)
}

fn radius(ctx: &Ctx, a: RadiusArgs) -> CliResult<()> {
    let n: u64 = ctx.cfg.need(a.base.n, "n")?;
    let spec = ctx.spec(a.base.spec)?;
    let kind: PriorKind = parse(&ctx.cfg.pick::<String>(a.kind, "kind")?.unwrap_or_else(|| "bulk".into()))?;
    let target = ctx.cfg.pick(a.power_target, "power-target")?.unwrap_or(spec.eta() / 2.0);
    let trials = ctx.cfg.pick(a.trials, "trials")?.unwrap_or(2000);
    let s_max = ctx.cfg.pick(a.s_max, "s-max")?.unwrap_or(100.0);
    let report = empirical_radius_with(&spec, n, kind, target, s_max, &ctx.sim_config(trials))?;
    let rate = minimax_rate_with(&spec, n, TailCut::I)?;
    let meta = ctx.metadata(
        Some(&spec),
        json!({ "n": n, "kind": kind, "power_target": target, "trials": trials, "s_max": s_max }),
    )?;
    ctx.emit_json(json!({
        "metadata": meta,
        "radius": report,
        "minimax_rate": rate,
        "ratio_to_rate": report.separation / rate.total,
    }))
}

fn oracle_check(ctx: &Ctx) -> CliResult<()> {
    let report = run_battery()?;
    let meta = ctx.metadata(None, json!({}))?;
    let passed = report.all_passed;
    ctx.emit_json(json!({ "metadata": meta, "report": to_value(&report)? }))?;
    if passed {
        Ok(())
    } else {
        Err(Error::Internal("oracle battery reported failures".into()).into())
    }
}

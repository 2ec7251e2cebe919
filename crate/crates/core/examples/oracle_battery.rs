//! Brute-force checks of pmfs, statistic moments and χ² closed forms.

use minitest::oracle::{enumerate_statistic_moments, run_battery, StatisticKind};
use minitest::statistics::moments_t_bulk;
use minitest::ModelKind;

fn main() -> minitest::Result<()> {
    let report = run_battery()?;
    for c in &report.checks {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        println!("{mark} {:<24} cases={:<6} worst={:.3e}  {}", c.name, c.cases, c.worst, c.detail);
    }

    // One case by hand: exact enumeration against the closed form.
    let (p, q) = ([0.3, 0.1], [0.35, 0.05]);
    let k = 4;
    let exact = enumerate_statistic_moments(ModelKind::Binomial, &p, &q, k, StatisticKind::TBulk { a: 2, b: 0.5 })?;
    let closed = moments_t_bulk(ModelKind::Binomial, &p, &q, 2, 0.5, k)?;
    println!("T_bulk mean {:.6e} / {:.6e}, variance {:.6e} / {:.6e}", exact.mean, closed.mean, exact.variance, closed.variance_exact);
    std::process::exit(if report.all_passed { 0 } else { 1 });
}

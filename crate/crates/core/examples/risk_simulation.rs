//! Type-I and type-II error across sample sizes, written as CSV.
//!
//! Run with `--release`; a few hundred thousand tests are executed.

use minitest::montecarlo::{
    empirical_radius, estimate_type1_with, estimate_type2_with, write_rows, RiskRow, SimConfig,
};
use minitest::rates::minimax_rate;
use minitest::{ModelKind, NullSpec, PriorKind};

fn main() -> minitest::Result<()> {
    let spec = NullSpec::new(ModelKind::Multinomial, vec![1.0 / 40.0; 40], 0.2, 1.0)?;
    let cfg = SimConfig::new(4000, 42);
    let mut rows = Vec::new();
    for n in [50, 100, 200, 400] {
        let r = estimate_type1_with(&spec, n, &cfg)?;
        rows.push(RiskRow::new(&spec, n, "type1", 0.0, &r));
        for scale in [2.0, 5.0, 10.0] {
            let r = estimate_type2_with(&spec, n, PriorKind::BulkRademacher, scale, &cfg)?;
            rows.push(RiskRow::new(&spec, n, "bulk", scale, &r));
        }
    }
    write_rows(&rows, std::io::stdout())?;

    // Smallest bulk scale the test detects with power 0.9, against the rate.
    let n = 200;
    let sep = empirical_radius(&spec, n, PriorKind::BulkRademacher, 0.1, 2000, 7)?;
    let rate = minimax_rate(&spec, n)?.total;
    eprintln!("n={n}: empirical radius {sep:.4}, rate {rate:.4}, ratio {:.2}", sep / rate);
    Ok(())
}

//! Identity testing for a symmetric matrix of edge probabilities.

use minitest::rates::{flatten_upper, frobenius_rate};
use minitest::sampling::{draw_observations, trial_rng};
use minitest::statistics::frobenius_test;
use minitest::{canonicalize, ingest_samples, ConstantLedger, ModelKind, NullSpec};

fn main() -> minitest::Result<()> {
    let k: usize = 12;
    let m: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 0.0 } else { 0.3 / (1 + i.abs_diff(j)) as f64 }).collect())
        .collect();
    let n = 100;
    println!("rate for a {k}×{k} matrix at n={n}: {:.4}", frobenius_rate(&m, n)?);

    let p = flatten_upper(&m)?;
    let eta = 0.1;
    let default = NullSpec::new(ModelKind::Binomial, p.clone(), eta, 2.0)?;
    // The default constant is 1/4, far below the null spread of T₂.
    // Chebyshev gives a level-η threshold at 2/√η.
    let ledger = ConstantLedger { c_eta_frob: 2.0 / eta.sqrt(), ..ConstantLedger::defaults(eta) };
    let chebyshev = NullSpec::with_constants(ModelKind::Binomial, p.clone(), eta, 2.0, ledger)?;
    let canon = canonicalize(&default);
    let denser: Vec<f64> = p.iter().map(|x| (x * 1.6).min(1.0)).collect();
    let trials = 500;
    for (name, spec) in [("C = 1/4", &default), ("C = 2/√η", &chebyshev)] {
        for (label, truth) in [("null", &p), ("denser", &denser)] {
            let mut rejected = 0;
            for i in 0..trials {
                let mut rng = trial_rng(5, i);
                let raw = draw_observations(ModelKind::Binomial, truth, n, &mut rng)?;
                let sample = ingest_samples(&raw, &canon, &mut rng)?;
                let (_, _, reject) = frobenius_test(spec, &sample)?;
                rejected += reject as u64;
            }
            println!("{name:<9} {label:>6}: rejected {rejected}/{trials}");
        }
    }
    Ok(())
}

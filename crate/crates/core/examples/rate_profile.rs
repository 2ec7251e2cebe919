//! How the local rate moves with the shape of `p` and the norm exponent `t`.
//!
//! ```bash
//! cargo run -p minitest --example rate_profile
//! ```

use minitest::rates::{exponents, index_profile_for, lower_bound_rate, minimax_rate};
use minitest::{ModelKind, NullSpec};

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let z: f64 = v.iter().sum();
    v.into_iter().map(|x| x / z).collect()
}

fn main() -> minitest::Result<()> {
    let nulls = [
        ("uniform", vec![1.0; 200]),
        ("power law 1.5", (1..=200).map(|i| (i as f64).powf(-1.5)).collect()),
        ("geometric 0.9", (0..200).map(|i| 0.9f64.powi(i)).collect()),
    ];

    for t in [1.0, 4.0 / 3.0, 2.0] {
        let (r, b) = exponents(t)?;
        println!("t = {t:.3}  r = {r:.3}  b = {b:.3}");
        for (name, raw) in &nulls {
            let spec = NullSpec::new(ModelKind::Multinomial, normalized(raw.clone()), 0.1, t)?;
            for n in [100, 1_000, 10_000] {
                let prof = index_profile_for(&spec, n)?;
                let rate = minimax_rate(&spec, n)?;
                let lb = lower_bound_rate(&spec, n)?;
                println!(
                    "  {name:<14} n={n:<6} I={:<4} A={:<4} U={:<5} bulk={:.4} tail={:.4} total={:.4} lower={:.4}",
                    prof.i,
                    prof.a,
                    prof.u.map_or("-".to_string(), |u| u.to_string()),
                    rate.bulk_term,
                    rate.tail_term,
                    rate.total,
                    lb.total,
                );
            }
        }
    }

    // A Bernoulli null is folded so every coordinate sits below 1/2.
    let spec = NullSpec::new(ModelKind::Binomial, vec![0.99, 0.5, 0.01, 0.001], 0.1, 1.0)?;
    let rate = minimax_rate(&spec, 500)?;
    println!("binomial [0.99, 0.5, 0.01, 0.001] at n=500: {:.4}", rate.total);
    Ok(())
}

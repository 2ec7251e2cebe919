//! Poissonized sampling and the two reductions between Bernoulli rows and
//! Poisson counts.

use minitest::sampling::{
    binomial_to_poisson_subsample, draw_observations, poisson_to_bernoulli_stream, poissonize_binomial,
    poissonize_multinomial, solve_c, solve_c_bar, trial_rng, Reduction,
};
use minitest::{ModelKind, RawSamples};

fn main() -> minitest::Result<()> {
    let mut rng = trial_rng(3, 0);
    let q = [0.5, 0.3, 0.15, 0.05];
    println!("multinomial histogram, Poi(n) draws: {:?}", poissonize_multinomial(&q, 100, &mut rng)?);
    println!("binomial histogram, Poi(n) rows:     {:?}", poissonize_binomial(&q, 100, &mut rng)?);

    let n = 100;
    let eta = 0.2;
    let c = solve_c(n, eta)?;
    let c_bar = solve_c_bar(n, eta)?;
    println!("truncation factors at n={n}: c = {c:.3}, c̄ = {c_bar:.3}");

    // Poisson counts → Bernoulli rows.
    let lam = [0.02, 0.01, 0.005];
    let RawSamples::Counts(rows) = draw_observations(ModelKind::Poisson, &lam, n, &mut rng)? else {
        unreachable!()
    };
    let y: Vec<u64> = (0..lam.len()).map(|j| rows.iter().map(|r| r[j]).sum()).collect();
    match poisson_to_bernoulli_stream(&y, n, c, &mut rng)? {
        Reduction::Ok(b) => println!("{} Bernoulli rows from counts {y:?}", b.len()),
        Reduction::Failed(f) => println!("reduction failed: {f:?}"),
    }

    // Bernoulli rows → Poisson totals.
    let RawSamples::Bernoulli(rows) = draw_observations(ModelKind::Binomial, &lam, n, &mut rng)? else {
        unreachable!()
    };
    match binomial_to_poisson_subsample(&rows, c_bar, &mut rng)? {
        Reduction::Ok(s) => println!("kept {} rows, totals {:?}", s.rows.len(), s.totals),
        Reduction::Failed(f) => println!("subsample failed: {f:?}"),
    }
    Ok(())
}

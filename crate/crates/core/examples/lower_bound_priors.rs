//! The three lower-bound constructions and the χ² certificate that makes the
//! bulk prior indistinguishable from the null.

use minitest::adversary::{
    chi2_cosh_bound, chi2_divergence_closed_form, holder_saturating_gamma, Adversary,
};
use minitest::oracle::exact_mixture_chi2;
use minitest::rates::minimax_rate;
use minitest::sampling::trial_rng;
use minitest::{ModelKind, NullSpec, PriorKind};

fn main() -> minitest::Result<()> {
    let n = 200;
    let mut p: Vec<f64> = (1..=8).map(|i| 0.3 / i as f64).collect();
    p.extend(std::iter::repeat_n(2e-5, 4000));
    let spec = NullSpec::new(ModelKind::Binomial, p, 0.2, 1.0)?;
    let adv = Adversary::new(&spec, n)?;
    let prof = adv.profile();
    println!("I={} A={} U={:?}  rate {:.4}", prof.i, prof.a, prof.u, minimax_rate(&spec, n)?.total);

    let mut rng = trial_rng(11, 0);
    for kind in [PriorKind::BulkRademacher, PriorKind::TailSparse, PriorKind::SingleCoordinate] {
        match adv.draw(kind, 1.0, &mut rng) {
            Ok(d) => println!("{kind:>6}: separation {:.5}", d.realized_separation),
            Err(e) => println!("{kind:>6}: {e}"),
        }
    }
    let (u, pi_bar, _) = adv.tail_parameters(1.0)?;
    println!("tail prior starts at U={u} with π̄ = {pi_bar:.3e}");

    // The χ² divergence of the bulk mixture, three ways.
    let bulk_p = &adv.canonical().effective()[..prof.a];
    let gamma = adv.bulk_perturbation(1.0)?;
    let closed = chi2_divergence_closed_form(bulk_p, &gamma, n)?;
    let cosh = chi2_cosh_bound(bulk_p, &gamma, n)?;
    let small_n = 4;
    let exact = exact_mixture_chi2(&bulk_p[..2], &gamma[..2], small_n)?;
    let closed_small = chi2_divergence_closed_form(&bulk_p[..2], &gamma[..2], small_n)?;
    println!("χ²: closed form {closed:.4e}, cosh bound {cosh:.4e}, limit {:.4e}", 4.0 * 0.8f64.powi(2));
    println!("    2 coordinates at n={small_n}: enumerated {exact:.6e} vs closed form {closed_small:.6e}");

    // Push γ to the edge of the χ² budget instead.
    let h = holder_saturating_gamma(bulk_p, n, 1.0, spec.t())?;
    println!("saturating γ: λ = {:.4}, clamped {}", h.lambda, h.clamped);
    Ok(())
}

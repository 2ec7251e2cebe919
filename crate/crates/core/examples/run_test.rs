//! Draw data from the null and from a shifted alternative, then run the
//! aggregate test on both.

use minitest::sampling::{draw_observations, trial_rng};
use minitest::statistics::{run_test_with, TestOptions};
use minitest::{canonicalize, ingest_samples, ModelKind, NullSpec};

fn main() -> minitest::Result<()> {
    // A head of 30 coordinates and a long, light tail.
    let mut p: Vec<f64> = (1..=30).map(|i| 0.4 / i as f64).collect();
    p.extend(std::iter::repeat_n(1e-4, 3000));
    let spec = NullSpec::new(ModelKind::Binomial, p.clone(), 0.1, 1.5)?;
    let canon = canonicalize(&spec);
    let n = 400;

    // Move mass on the five largest coordinates.
    let mut q = p.clone();
    for (j, x) in q.iter_mut().take(5).enumerate() {
        *x += if j % 2 == 0 { 0.08 } else { -0.08 };
    }

    let opts = TestOptions { include_t2: true, ..TestOptions::default() };
    for (label, truth) in [("null", &p), ("shifted", &q)] {
        let mut rng = trial_rng(7, 0);
        let raw = draw_observations(ModelKind::Binomial, truth, n, &mut rng)?;
        let sample = ingest_samples(&raw, &canon, &mut rng)?;
        let v = run_test_with(&spec, &sample, opts)?;
        println!("{label}:");
        println!("  T_bulk = {:>9.3e}  threshold {:.3e}  reject {}", v.t_bulk, v.thr_bulk, v.decide_bulk);
        println!("  T1     = {:>9.3e}  threshold {:.3e}  reject {}", v.t1, v.thr_t1, v.decide_t1);
        println!("  collision in tail: {}", v.collision_found);
        if let (Some(t2), Some(thr)) = (v.t2, v.thr_t2) {
            println!("  T2     = {t2:>9.3e}  threshold {thr:.3e}");
        }
        println!("  => reject: {}", v.decide_aggregate);
    }
    Ok(())
}

//! Properties of the cut indices over random nulls.

use minitest::rates::{index_profile_for, lower_bound_rate, minimax_rate};
use minitest::{ModelKind, NullSpec};
use proptest::prelude::*;

fn shapes() -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        (1usize..300).prop_map(|n| vec![1.0; n]),
        (1usize..300, 0.2f64..0.999).prop_map(|(n, r)| (0..n).map(|i| r.powi(i as i32)).collect()),
        (1usize..300, 0.2f64..3.0).prop_map(|(n, a)| (1..=n).map(|i| (i as f64).powf(-a)).collect()),
        prop::collection::vec(prop_oneof![3 => Just(0.0), 1 => 1e-6f64..1e-3, 1 => 0.05f64..1.0], 1..200),
    ]
}

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let z: f64 = v.iter().sum();
    if z <= 0.0 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= z);
    Some(v)
}

fn spec(model: ModelKind, raw: Vec<f64>, eta: f64, t: f64) -> Option<NullSpec> {
    let p = match model {
        ModelKind::Binomial => {
            let m = raw.iter().cloned().fold(0.0, f64::max);
            if m <= 0.0 {
                raw
            } else {
                raw.iter().map(|x| x / m * 0.5).collect()
            }
        }
        _ => normalize(raw)?,
    };
    if model == ModelKind::Multinomial && p.len() < 2 {
        return None;
    }
    NullSpec::new(model, p, eta, t).ok()
}

fn models() -> impl Strategy<Value = ModelKind> {
    prop_oneof![Just(ModelKind::Binomial), Just(ModelKind::Poisson), Just(ModelKind::Multinomial)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn tail_beyond_a_has_few_collisions(
        raw in shapes(), model in models(), eta in 0.05f64..0.5, t in 1.0f64..=2.0, n in 2u64..5000,
    ) {
        let Some(s) = spec(model, raw, eta, t) else { return Ok(()) };
        let c = s.constants();
        let prof = index_profile_for(&s, n).unwrap();
        let nf = n as f64;
        prop_assert!(prof.sq_gt_a * nf * nf <= (c.c_a4 + c.c_i) * (1.0 + 1e-9));
    }

    #[test]
    fn tail_mass_beyond_i_matches_beyond_u(
        raw in shapes(), model in models(), eta in 0.05f64..0.5, t in 1.0f64..=2.0, n in 2u64..5000,
    ) {
        let Some(s) = spec(model, raw, eta, t) else { return Ok(()) };
        let c = s.constants();
        let prof = index_profile_for(&s, n).unwrap();
        let inv = 1.0 / n as f64;
        let lhs = prof.mass_gt_i + inv;
        let rhs = prof.mass_ge_u.unwrap_or(0.0) + inv;
        prop_assert!(lhs <= (3.0 + c.c_i.sqrt()) * rhs * (1.0 + 1e-9), "{lhs} vs {rhs}");
        prop_assert!(rhs <= lhs * (1.0 + 1e-12));
    }

    #[test]
    fn tail_mass_beyond_a_matches_beyond_i(
        raw in shapes(), model in models(), eta in 0.05f64..0.5, t in 1.0f64..=2.0, n in 2u64..5000,
    ) {
        let Some(s) = spec(model, raw, eta, t) else { return Ok(()) };
        let c = s.constants();
        let prof = index_profile_for(&s, n).unwrap();
        let inv = 1.0 / n as f64;
        let k = 1.0 + (c.c_a4 / c.c_i).max(c.c_a4.powf(1.5) / c.c_i);
        prop_assert!(prof.mass_gt_a + inv <= k * (prof.mass_gt_i + inv) * (1.0 + 1e-9));
        prop_assert!(prof.mass_gt_i <= prof.mass_gt_a + 1e-12);
    }

    #[test]
    fn rate_ignores_coordinate_order(
        raw in shapes(), model in models(), t in 1.0f64..=2.0, n in 2u64..5000, seed in any::<u64>(),
    ) {
        let Some(s) = spec(model, raw, 0.1, t) else { return Ok(()) };
        let mut p = s.p().to_vec();
        // Deterministic shuffle.
        let len = p.len();
        let mut state = seed | 1;
        for i in (1..len).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            p.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let shuffled = NullSpec::new(model, p, 0.1, t).unwrap();
        prop_assert_eq!(minimax_rate(&s, n).unwrap(), minimax_rate(&shuffled, n).unwrap());
    }

    #[test]
    fn lower_bound_form_never_exceeds_rate(
        raw in shapes(), model in models(), eta in 0.05f64..0.5, t in 1.0f64..=2.0, n in 2u64..5000,
    ) {
        let Some(s) = spec(model, raw, eta, t) else { return Ok(()) };
        let lb = lower_bound_rate(&s, n).unwrap();
        let r = minimax_rate(&s, n).unwrap();
        prop_assert!(lb.bulk_term <= r.bulk_term * (1.0 + 1e-12));
        prop_assert_eq!(lb.tail_term, r.tail_term);
    }
}

#[test]
fn binomial_flip_is_symmetric() {
    let p = vec![0.9, 0.3, 0.75, 0.02];
    let flipped: Vec<f64> = p.iter().map(|x| 1.0 - x).collect();
    let a = NullSpec::new(ModelKind::Binomial, p, 0.1, 1.5).unwrap();
    let b = NullSpec::new(ModelKind::Binomial, flipped, 0.1, 1.5).unwrap();
    for n in [10, 100, 1000] {
        let (ra, rb) = (minimax_rate(&a, n).unwrap(), minimax_rate(&b, n).unwrap());
        assert!((ra.total - rb.total).abs() < 1e-12);
    }
}

#[test]
fn multinomial_drops_the_largest_category() {
    let p = vec![0.5, 0.3, 0.2];
    let m = NullSpec::new(ModelKind::Multinomial, p, 0.1, 1.0).unwrap();
    let poi = NullSpec::new(ModelKind::Poisson, vec![0.3, 0.2], 0.1, 1.0).unwrap();
    for n in [10, 100, 1000] {
        assert_eq!(minimax_rate(&m, n).unwrap(), minimax_rate(&poi, n).unwrap());
    }
}

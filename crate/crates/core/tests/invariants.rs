//! Property tests on the public API.

use jkolab_core::ab::{ab_sequence, F_inverse, F};
use jkolab_core::ot1d::{w2_quantile, QuantileFunction};
use jkolab_core::transport::w2_bruteforce;
use proptest::prelude::*;

fn atoms() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..7).prop_flat_map(|k| (prop::collection::vec(-2.0f64..2.0, k), prop::collection::vec(0.05f64..1.0, k))).prop_map(|(x, w)| {
        let s: f64 = w.iter().sum();
        (x, w.into_iter().map(|v| v / s).collect())
    })
}

proptest! {
    #[test]
    fn f_inverse_inverts(y in 1e-6f64..50.0, d in 1usize..=2, m in 0.6f64..3.0) {
        let x = F_inverse(y, d, m, 1e-14).unwrap();
        prop_assert!(x > 0.0 && x < 1.0);
        prop_assert!((F(x, d, m).unwrap() - y).abs() <= 1e-9 * y.max(1.0));
    }

    #[test]
    fn sequence_decreases_in_the_unit_interval(d in 1usize..=2, m in 0.6f64..3.0) {
        let s = ab_sequence(d, m, 200).unwrap();
        prop_assert_eq!(s.values[0], 1.0);
        prop_assert!(s.values.windows(2).all(|w| 0.0 < w[1] && w[1] < w[0]));
    }

    #[test]
    fn quantile_w2_matches_the_transport_lp((x, a) in atoms(), (y, b) in atoms()) {
        let qa = QuantileFunction::from_atoms(&x, &a).unwrap();
        let qb = QuantileFunction::from_atoms(&y, &b).unwrap();
        let q = w2_quantile(&qa, &qb);
        prop_assert!((q - w2_bruteforce(&x, &a, &y, &b).unwrap()).abs() < 1e-9);
        prop_assert!((q - w2_quantile(&qb, &qa)).abs() < 1e-12);
    }

    #[test]
    fn translation_costs_its_length((x, a) in atoms(), s in -1.0f64..1.0) {
        let y: Vec<f64> = x.iter().map(|v| v + s).collect();
        let q = w2_quantile(&QuantileFunction::from_atoms(&x, &a).unwrap(), &QuantileFunction::from_atoms(&y, &a).unwrap());
        prop_assert!((q - s.abs()).abs() < 1e-9);
    }
}

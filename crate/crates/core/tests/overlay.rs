use proptest::prelude::*;
use vinehedge_core::overlay::{
    build_overlay, build_ternary, cost_of_carry, currency_exposure, total_overlay,
};

const USD_GBP_JPY_RATES: [f64; 3] = [0.02, 0.04, 0.01];

/// Sell 9% USD for GBP, buy 1% USD against JPY, sell 2% GBP for JPY.
fn worked_positions() -> Vec<f64> {
    vec![-0.09, 0.01, -0.02]
}

#[test]
fn three_currency_carry_table() {
    let t = build_ternary(3).unwrap();
    let o = build_overlay(&t, &worked_positions()).unwrap();
    let carry = o.contract_carry(&USD_GBP_JPY_RATES);
    for (got, want) in carry.iter().zip([0.0018, 0.0001, -0.0006]) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    let net = o.positions();
    for (got, want) in net.iter().zip([-0.08, 0.07, 0.01]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert!((cost_of_carry(&net, &USD_GBP_JPY_RATES) - 0.0013).abs() < 1e-12);
    assert!((carry.iter().sum::<f64>() - 0.0013).abs() < 1e-12);
    assert!((o.total() - 0.08).abs() < 1e-12);
}

#[test]
fn single_contract_carries() {
    assert!((cost_of_carry(&[0.01, -0.01], &[0.02, 0.01]) - 0.0001).abs() < 1e-15);
    assert!((cost_of_carry(&[-0.02, 0.02], &[0.04, 0.01]) + 0.0006).abs() < 1e-15);
}

#[test]
fn exposure_adds_overlay_and_margin() {
    let c = currency_exposure(&[0.5, 0.3, 0.1], &[-0.08, 0.07, 0.01], 0.02, 0).unwrap();
    for (got, want) in c.iter().zip([0.44, 0.37, 0.11]) {
        assert!((got - want).abs() < 1e-15);
    }
    assert!(currency_exposure(&[0.5], &[0.1, 0.2], 0.0, 0).is_err());
}

proptest! {
    #[test]
    fn carry_is_bilinear(
        v in prop::collection::vec(-1.0f64..1.0, 4),
        w in prop::collection::vec(-1.0f64..1.0, 4),
        i in prop::collection::vec(0.0f64..0.1, 4),
        a in -3.0f64..3.0,
    ) {
        let sum: Vec<f64> = v.iter().zip(&w).map(|(x, y)| a * x + y).collect();
        let lhs = cost_of_carry(&sum, &i);
        let rhs = a * cost_of_carry(&v, &i) + cost_of_carry(&w, &i);
        prop_assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn overlay_rows_net_to_zero(q in prop::collection::vec(-0.2f64..0.2, 6)) {
        let t = build_ternary(4).unwrap();
        let o = build_overlay(&t, &q).unwrap();
        prop_assert!(o.positions().iter().sum::<f64>().abs() < 1e-14);
        let scaled: Vec<Vec<f64>> = o.f.iter().map(|r| r.iter().map(|x| -2.0 * x).collect()).collect();
        prop_assert!((total_overlay(&scaled) - 2.0 * o.total()).abs() < 1e-14);
    }
}

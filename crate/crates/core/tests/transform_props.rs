use geowarp::transform::{
    boxcox_forward, boxcox_inverse, count_forward, count_inverse, sal_forward, sal_inverse, Layer,
    SalParams, DEFAULT_DELTA,
};
use geowarp::{TransformChain, TransformSpec, YType};
use proptest::prelude::*;

fn sal_params() -> impl Strategy<Value = SalParams> {
    (-3.0..3.0f64, 0.2..4.0f64, 0.2..4.0f64, -3.0..3.0f64)
        .prop_map(|(a, b, c, d)| SalParams::new(a, b, c, d).unwrap())
}

proptest! {
    #[test]
    fn sal_round_trip(p in sal_params(), y in -20.0..20.0f64) {
        let back = sal_inverse(sal_forward(y, &p), &p);
        prop_assert!((back - y).abs() <= 1e-9 * y.abs().max(1.0));
    }

    #[test]
    fn sal_monotone_on_grid(p in sal_params()) {
        let v: Vec<f64> = (0..1000).map(|i| sal_forward(-10.0 + 0.02 * i as f64, &p)).collect();
        prop_assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn boxcox_round_trip(lambda in -2.5..2.5f64, ly in -6.0..6.0f64) {
        let y = ly.exp();
        let (back, clamped) = boxcox_inverse(boxcox_forward(y, lambda).unwrap(), lambda);
        prop_assert!(!clamped);
        prop_assert!((back - y).abs() <= 1e-9 * y.max(1.0));
    }

    #[test]
    fn boxcox_monotone_on_grid(lambda in -2.5..2.5f64) {
        let v: Vec<f64> = (1..=1000)
            .map(|i| boxcox_forward(0.01 * i as f64, lambda).unwrap())
            .collect();
        prop_assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn count_round_trip(y in 0u32..100_000) {
        let y = y as f64;
        let (back, _) = count_inverse(count_forward(y, DEFAULT_DELTA).unwrap(), DEFAULT_DELTA);
        prop_assert!((back - y).abs() <= 1e-9 * y.max(1.0));
    }

    #[test]
    fn chain_composes_layer_by_layer(p1 in sal_params(), p2 in sal_params(), y in -5.0..5.0f64) {
        let spec = TransformSpec::new(YType::Continuous, false, 2);
        let std = Layer::Standardize { mean: 0.3, sd: 1.7 };
        let one = TransformChain::from_layers(spec, vec![std.clone(), Layer::Sal(p1)]);
        let two = TransformChain::from_layers(spec, vec![std, Layer::Sal(p1), Layer::Sal(p2)]);
        let (z1, _) = one.forward(y, 0.0).unwrap();
        let (z2, _) = two.forward(y, 0.0).unwrap();
        prop_assert!((z2 - sal_forward(z1, &p2)).abs() <= 1e-12 * z2.abs().max(1.0));
    }

    #[test]
    fn chain_round_trip_and_positive_jacobian(
        p1 in sal_params(), p2 in sal_params(), lambda in -1.0..2.0f64, ly in -3.0..3.0f64,
    ) {
        let spec = TransformSpec::new(YType::Continuous, true, 2);
        let chain = TransformChain::from_layers(
            spec,
            vec![
                Layer::BoxCox { lambda },
                Layer::Standardize { mean: 0.1, sd: 0.8 },
                Layer::Sal(p1),
                Layer::Sal(p2),
            ],
        );
        let y = ly.exp();
        let (z, lj) = chain.forward(y, 0.0).unwrap();
        prop_assert!(lj.is_finite());
        let (back, d, clamped) = chain.inverse_with_deriv(z, 0.0);
        prop_assert!(!clamped);
        prop_assert!(d > 0.0);
        prop_assert!((back - y).abs() <= 1e-8 * y.max(1.0));
    }
}

#[test]
fn identity_sal_is_exact() {
    let p = SalParams::new(0.0, 1.0, 1.0, 0.0).unwrap();
    for i in 0..1000 {
        let y = -50.0 + 0.1 * i as f64 + 1e-3;
        assert_eq!(sal_forward(y, &p), y);
        assert_eq!(sal_inverse(y, &p), y);
    }
}

#[test]
fn fitted_chain_round_trips_training_data() {
    let s = geowarp_test_sample();
    for d in 0..3 {
        let spec = TransformSpec::new(YType::Continuous, true, d);
        let fit = geowarp::transform::fit_chain(&s, &spec, None, Default::default()).unwrap();
        for &y in &s {
            let (z, _) = fit.chain.forward(y, 0.0).unwrap();
            let (back, _) = fit.chain.inverse(z, 0.0);
            assert!(
                (back - y).abs() <= 1e-8 * y.abs().max(1.0),
                "D={d}: {y} -> {back}"
            );
        }
    }
}

fn geowarp_test_sample() -> Vec<f64> {
    // Deterministic right-skewed positive sample.
    (1..=400)
        .map(|i| {
            let u = (i as f64 - 0.5) / 400.0;
            (2.0 * (u / (1.0 - u)).ln().tanh() + 1.5 * u.powi(3)).exp()
        })
        .collect()
}

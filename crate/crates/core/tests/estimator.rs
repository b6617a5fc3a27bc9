mod common;

use geowarp::linalg::ols;
use geowarp::*;
use nalgebra::DMatrix;

fn opts() -> FitOptions {
    FitOptions::default()
}

#[test]
fn empty_basis_gaussian_is_ols() {
    let s = common::synthetic(80, 1);
    let y: Vec<f64> = s.y.iter().map(|v| v.ln()).collect();
    let spec = ModelSpec::new(TransformSpec::gaussian()).with_const(&["x1", "x2"]);
    let f = fit_resf(&s.data(&y), &spec, &EigenBasis::empty(80), &opts()).unwrap();
    let x = DMatrix::from_fn(80, 3, |i, j| [1.0, s.x1[i], s.x2[i]][j]);
    let o = ols(&x, &y, None).unwrap();
    let s2 = o.rss / 77.0;
    let inv = (x.transpose() * &x).try_inverse().unwrap();
    for j in 0..3 {
        assert!((f.coefficients[j].estimate - o.coef[j]).abs() < 1e-8);
        assert!((f.coefficients[j].se - (s2 * inv[(j, j)]).sqrt()).abs() < 1e-8);
    }
    assert!((f.fit_stats.resid_se - s2.sqrt()).abs() < 1e-8);
}

#[test]
fn deeper_chains_do_not_lose_likelihood() {
    let s = common::synthetic(120, 2);
    let data = s.data(&s.y);
    let mut last = f64::NEG_INFINITY;
    for d in 0..3 {
        let spec = ModelSpec::new(TransformSpec::new(YType::Continuous, true, d))
            .with_const(&["x1", "x2"]);
        let f = fit_resf(&data, &spec, &s.basis, &opts()).unwrap();
        assert!(f.criteria.rloglik >= last - 1e-6, "D={d}");
        last = f.criteria.rloglik;
    }
}

#[test]
fn varying_coefficient_does_not_lose_likelihood() {
    let s = common::synthetic(120, 3);
    let data = s.data(&s.y);
    let ts = TransformSpec::new(YType::Continuous, true, 0);
    let a = fit_resf(
        &data,
        &ModelSpec::new(ts).with_const(&["x1", "x2"]),
        &s.basis,
        &opts(),
    )
    .unwrap();
    let b = fit_resf_vc(
        &data,
        &ModelSpec::new(ts).with_svc(&["x1"]).with_const(&["x2"]),
        &s.basis,
        &opts(),
    )
    .unwrap();
    assert!(b.criteria.rloglik >= a.criteria.rloglik - 1e-6);
}

#[test]
fn group_effects_sum_to_zero() {
    let s = common::synthetic(90, 4);
    let levels = ["north", "south", "east"];
    let group: Vec<String> = (0..90).map(|i| levels[i % 3].to_string()).collect();
    let data = s.data(&s.y).with_group(group);
    let spec = ModelSpec::new(TransformSpec::new(YType::Continuous, true, 0)).with_const(&["x1"]);
    let f = fit_resf(&data, &spec, &s.basis, &opts()).unwrap();
    let g = f.group_effects.as_ref().unwrap();
    let names: Vec<&str> = g.iter().map(|e| e.level.as_str()).collect();
    assert_eq!(names, levels);
    assert!(g.iter().map(|e| e.estimate).sum::<f64>().abs() < 1e-8);
    assert!(g[..2].iter().all(|e| e.se.is_some()) && g[2].se.is_none());
}

#[test]
fn scaling_offsets_shifts_only_the_intercept() {
    let s = common::synthetic(100, 5);
    let offset: Vec<f64> = (0..100).map(|i| 1.0 + (i % 7) as f64).collect();
    let spec = ModelSpec::new(TransformSpec::new(YType::Count, false, 0)).with_const(&["x1", "x2"]);
    let c = 3.5;
    let a = fit_resf(
        &s.data(&s.count).with_offset(offset.clone()),
        &spec,
        &s.basis,
        &opts(),
    )
    .unwrap();
    let scaled = offset.iter().map(|o| o * c).collect();
    let b = fit_resf(
        &s.data(&s.count).with_offset(scaled),
        &spec,
        &s.basis,
        &opts(),
    )
    .unwrap();
    let shift = b.coefficients[0].estimate - a.coefficients[0].estimate;
    assert!((shift + c.ln()).abs() < 1e-6, "intercept shift {shift}");
    for j in 1..3 {
        assert!((a.coefficients[j].estimate - b.coefficients[j].estimate).abs() < 1e-6);
    }
}

#[test]
fn rescaled_covariate_rescales_its_coefficient() {
    let s = common::synthetic(100, 6);
    let y: Vec<f64> = s.y.iter().map(|v| v.ln()).collect();
    let spec = ModelSpec::new(TransformSpec::gaussian()).with_const(&["x1", "x2"]);
    let a = fit_resf(&s.data(&y), &spec, &s.basis, &opts()).unwrap();
    let c = 4.0;
    let data = ModelData::new(y.clone())
        .with_column("x1", s.x1.iter().map(|v| v * c).collect())
        .with_column("x2", s.x2.clone());
    let b = fit_resf(&data, &spec, &s.basis, &opts()).unwrap();
    let (ba, bb) = (a.coefficients[1].estimate, b.coefficients[1].estimate);
    assert!((bb - ba / c).abs() < 1e-8 * ba.abs(), "{ba} / {c} vs {bb}");
    for i in 0..100 {
        assert!((a.fitted.z_hat[i] - b.fitted.z_hat[i]).abs() < 1e-10);
    }
}

#[test]
fn repeated_fits_are_bitwise_identical() {
    let s = common::synthetic(100, 7);
    let spec = ModelSpec::new(TransformSpec::new(YType::Continuous, true, 1))
        .with_svc(&["x1"])
        .with_const(&["x2"]);
    let a = fit_resf_vc(&s.data(&s.y), &spec, &s.basis, &opts()).unwrap();
    let seq = FitOptions {
        parallelism: Parallelism::Sequential,
        ..opts()
    };
    let b = fit_resf_vc(&s.data(&s.y), &spec, &s.basis, &seq).unwrap();
    assert_eq!(a, b);
}

#[test]
fn info_criteria_identity_and_null_model() {
    let s = common::synthetic(100, 8);
    let spec =
        ModelSpec::new(TransformSpec::new(YType::Continuous, true, 1)).with_const(&["x1", "x2"]);
    let f = fit_resf(&s.data(&s.y), &spec, &s.basis, &opts()).unwrap();
    let c = &f.criteria;
    assert!((c.bic - c.aic - c.p as f64 * ((c.n_eff as f64).ln() - 2.0)).abs() < 1e-9);
    assert!((c.aic - (-2.0 * c.rloglik + 2.0 * c.p as f64)).abs() < 1e-9);
    assert!(f.null_model.bic.is_finite());
}

#[test]
fn svc_and_const_columns_must_be_disjoint() {
    let s = common::synthetic(40, 9);
    let spec = ModelSpec::new(TransformSpec::gaussian())
        .with_svc(&["x1"])
        .with_const(&["x1"]);
    assert!(fit_resf_vc(&s.data(&s.y), &spec, &s.basis, &opts()).is_err());
}

#[test]
fn boxcox_regime_rejects_nonpositive_response() {
    let s = common::synthetic(40, 10);
    let mut y = s.y.clone();
    y[3] = 0.0;
    let spec = ModelSpec::new(TransformSpec::new(YType::Continuous, true, 0));
    assert!(fit_resf(&s.data(&y), &spec, &s.basis, &opts()).is_err());
}

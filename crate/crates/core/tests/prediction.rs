mod common;

use geowarp::basis::ExtendedBasis;
use geowarp::inference::{estimated_density, marginal_effects, significance_summary};
use geowarp::predict::NewData;
use geowarp::*;
use nalgebra::DMatrix;

fn fitted(ts: TransformSpec, seed: u64) -> (common::Synthetic, FittedModel) {
    let s = common::synthetic(120, seed);
    let y = if ts.is_count() {
        s.count.clone()
    } else {
        s.y.clone()
    };
    let spec = ModelSpec::new(ts).with_svc(&["x1"]).with_const(&["x2"]);
    let f = fit_resf_vc(&s.data(&y), &spec, &s.basis, &FitOptions::default()).unwrap();
    (s, f)
}

fn new_sites(s: &common::Synthetic, m: usize) -> (NewData, ExtendedBasis) {
    let sites: Vec<[f64; 2]> = (0..m)
        .map(|i| {
            [
                5.0 + 90.0 * i as f64 / m as f64,
                50.0 + 30.0 * (i as f64).sin(),
            ]
        })
        .collect();
    let c0 = CoordinateSet::new_prediction(sites, None).unwrap();
    let nd = NewData::new(m)
        .with_column(
            "x1",
            (0..m).map(|i| 0.1 + 2.8 * i as f64 / m as f64).collect(),
        )
        .with_column("x2", (0..m).map(|i| (i as f64 * 0.7).cos()).collect());
    (nd, extend_basis(&s.basis, &c0).unwrap())
}

#[test]
fn prediction_decomposes_and_brackets() {
    for ts in [
        TransformSpec::new(YType::Continuous, true, 0),
        TransformSpec::new(YType::Continuous, true, 1),
        TransformSpec::new(YType::Count, false, 0),
    ] {
        let (s, f) = fitted(ts, 21);
        let (nd, e0) = new_sites(&s, 25);
        let p = predict_oos(&f, &nd, &e0, true).unwrap();
        let q = p.quantiles.as_ref().unwrap();
        for i in 0..25 {
            let parts = p.xb[i] + p.sf_residual[i] + p.other[i];
            assert!((p.pred_trans_g[i] - parts).abs() < 1e-10);
            assert!(p.len95.as_ref().unwrap()[i] >= 0.0);
            assert!(q.rows[i].windows(2).all(|w| w[0] < w[1]));
            if !ts.is_count() {
                assert_eq!(q.column(0.5).unwrap()[i], p.pred[i]);
                assert!(p.pred[i] >= q.rows[i][0] && p.pred[i] <= *q.rows[i].last().unwrap());
            }
        }
    }
}

#[test]
fn permuting_rows_permutes_predictions() {
    let (s, f) = fitted(TransformSpec::new(YType::Continuous, true, 1), 22);
    let (nd, e0) = new_sites(&s, 12);
    let perm: Vec<usize> = (0..12).map(|i| (i * 5) % 12).collect();
    let nd2 = NewData {
        columns: nd
            .columns
            .iter()
            .map(|(n, v)| (n.clone(), perm.iter().map(|&i| v[i]).collect()))
            .collect(),
        ..nd.clone()
    };
    let e2 = ExtendedBasis {
        vectors0: DMatrix::from_fn(12, e0.vectors0.ncols(), |r, c| e0.vectors0[(perm[r], c)]),
        eigenvalues: e0.eigenvalues.clone(),
    };
    let a = predict_oos(&f, &nd, &e0, true).unwrap();
    let b = predict_oos(&f, &nd2, &e2, true).unwrap();
    for (r, &i) in perm.iter().enumerate() {
        assert_eq!(a.pred[i], b.pred[r]);
        assert_eq!(a.pred_trans_g_se[i], b.pred_trans_g_se[r]);
        assert_eq!(
            a.quantiles.as_ref().unwrap().rows[i],
            b.quantiles.as_ref().unwrap().rows[r]
        );
    }
}

#[test]
fn prediction_input_errors() {
    let (s, f) = fitted(TransformSpec::new(YType::Count, false, 0), 23);
    let (nd, e0) = new_sites(&s, 4);
    let missing = NewData::new(4).with_column("x1", vec![1.0; 4]);
    assert!(predict_oos(&f, &missing, &e0, false).is_err());
    let bad_offset = nd.clone().with_offset(vec![1.0, 0.0, 1.0, 1.0]);
    assert!(predict_oos(&f, &bad_offset, &e0, false).is_err());
    let short = ExtendedBasis {
        vectors0: e0.vectors0.rows(0, 3).into_owned(),
        eigenvalues: e0.eigenvalues.clone(),
    };
    assert!(predict_oos(&f, &nd, &short, false).is_err());
}

#[test]
fn marginal_effects_follow_coefficient_sign() {
    let (_, f) = fitted(TransformSpec::new(YType::Continuous, true, 1), 24);
    let me = marginal_effects(&f);
    assert_eq!(me.recommended, "median");
    let svc = f.svc_coefficient("x1").unwrap();
    for i in 0..f.n() {
        assert_eq!(me.values[i][0].signum(), svc.estimate[i].signum());
        assert_eq!(
            me.values[i][1].signum(),
            f.coefficient("x2").unwrap().estimate.signum()
        );
    }
}

#[test]
fn significance_buckets_cover_every_site() {
    let (_, f) = fitted(TransformSpec::new(YType::Count, false, 0), 25);
    for s in significance_summary(&f) {
        assert_eq!(
            s.not_significant + s.level10 + s.level5 + s.level1,
            f.n(),
            "{}",
            s.name
        );
    }
}

#[test]
fn density_is_proper() {
    let (_, f) = fitted(TransformSpec::new(YType::Continuous, true, 1), 26);
    let d = estimated_density(&f, 400);
    assert!(d.density.iter().all(|&v| v >= 0.0));
    let area = d.trapezoid_integral();
    assert!((0.98..=1.0 + 1e-9).contains(&area), "area {area}");
}

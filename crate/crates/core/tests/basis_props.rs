use geowarp::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn sites() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec(
        (0.0..50.0f64, 0.0..50.0f64).prop_map(|(x, y)| [x, y]),
        5..40,
    )
}

/// Largest eigenvalue of the doubly centered kernel relative to the spectral
/// radius, from nalgebra's own symmetric solver.
fn centered_lead_ratio(s: &[[f64; 2]]) -> f64 {
    let c = build_kernel_proximity(&CoordinateSet::new(s.to_vec(), None).unwrap())
        .unwrap()
        .values()
        .clone();
    let n = c.nrows();
    let m = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let ev = (&m * c * &m).symmetric_eigenvalues();
    ev.max() / ev.amax()
}

/// Extracts the basis, or confirms that an empty spectrum is reported
/// only when the centered kernel really has no positive eigenvalue.
fn basis_or_empty(s: &[[f64; 2]]) -> std::result::Result<Option<EigenBasis>, TestCaseError> {
    match basis_of(s, 0.0) {
        Some(b) => Ok(Some(b)),
        None => {
            let r = centered_lead_ratio(s);
            prop_assert!(r < 1e-6, "basis rejected with lead ratio {}", r);
            Ok(None)
        }
    }
}

fn basis_of(s: &[[f64; 2]], threshold: f64) -> Option<EigenBasis> {
    let coords = CoordinateSet::new(s.to_vec(), None).ok()?;
    extract_basis(&build_kernel_proximity(&coords).ok()?, threshold).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn basis_is_orthonormal_and_centered(s in sites()) {
        if let Some(b) = basis_or_empty(&s)? {
            let l = b.n_vectors();
            prop_assert!(l < s.len());
            let g = b.vectors.transpose() * &b.vectors - DMatrix::<f64>::identity(l, l);
            prop_assert!(g.amax() < 1e-8);
            for c in b.vectors.column_iter() {
                prop_assert!(c.sum().abs() < 1e-8);
            }
            prop_assert!(b.eigenvalues.iter().all(|&v| v > 0.0));
            prop_assert!(b.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn higher_threshold_keeps_fewer_vectors(s in sites(), t1 in 0.0..0.5f64, t2 in 0.0..0.5f64) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        if let (Some(a), Some(b)) = (basis_of(&s, lo), basis_of(&s, hi)) {
            prop_assert!(b.n_vectors() <= a.n_vectors());
        }
    }

    #[test]
    fn extension_reproduces_training_sites(s in sites()) {
        if let Some(b) = basis_or_empty(&s)? {
            let c0 = CoordinateSet::new_prediction(s.clone(), None).unwrap();
            let e0 = extend_basis(&b, &c0).unwrap();
            prop_assert_eq!(e0.vectors0.ncols(), b.n_vectors());
            prop_assert!((e0.vectors0 - &b.vectors).amax() < 1e-6);
        }
    }
}

#[test]
fn near_equidistant_sites_have_no_basis() {
    let s = [
        [0.0, 0.0],
        [37.44460744791188, 0.0],
        [35.346202450170026, 13.283423647921992],
        [0.0, 32.18298157827832],
        [39.74834365604044, 43.77950268389274],
    ];
    let coords = CoordinateSet::new(s.to_vec(), None).unwrap();
    let err = extract_basis(&build_kernel_proximity(&coords).unwrap(), 0.0).unwrap_err();
    assert!(matches!(err, Error::NoPositiveEigenvalue));
    assert!(centered_lead_ratio(&s) < 1e-6);
}

#[test]
fn kernel_matrix_contract() {
    let s: Vec<[f64; 2]> = (0..30)
        .map(|i| [(i % 6) as f64 * 3.0, (i / 6) as f64 * 2.0])
        .collect();
    let p = build_kernel_proximity(&CoordinateSet::new(s, None).unwrap()).unwrap();
    let v = p.values();
    for i in 0..30 {
        assert_eq!(v[(i, i)], 0.0);
        for j in 0..30 {
            assert!(v[(i, j)] >= 0.0);
            assert_eq!(v[(i, j)], v[(j, i)]);
        }
    }
}

#[test]
fn contiguity_basis_cannot_be_extended() {
    let mut a = DMatrix::zeros(6, 6);
    for i in 0..5 {
        a[(i, i + 1)] = 1.0;
        a[(i + 1, i)] = 1.0;
    }
    let b = extract_basis(&build_contiguity_proximity(a, None).unwrap(), 0.0).unwrap();
    let c0 = CoordinateSet::new_prediction(vec![[0.0, 0.0]], None).unwrap();
    assert!(extend_basis(&b, &c0).is_err());
}

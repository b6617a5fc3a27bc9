//! Moran eigenvector bases and their Nyström extension.
//!
//! The basis is the set of eigenvectors of the doubly centered proximity
//! matrix `MCM`, `M = I - 11'/N`, with positive eigenvalues. Eigenvectors with
//! large eigenvalues describe smooth, positively autocorrelated map patterns.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen_desc;
use crate::parallel::{map_indices, Parallelism};
use crate::proximity::{dist, CoordinateSet, ProximityKind, ProximityMatrix};

/// Default eigenvalue threshold as a fraction of the leading eigenvalue:
/// every strictly positive eigenvalue is kept.
pub const DEFAULT_THRESHOLD: f64 = 0.0;

/// Eigenvalues below this fraction of the leading one count as zero.
const POSITIVE_TOL: f64 = 1e-8;

/// What a basis was extracted from; needed to extend it to new sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSource {
    pub kind: ProximityKind,
    /// Training coordinates (kernel bases only).
    pub coords: Option<CoordinateSet>,
    /// Column means of the training proximity matrix (kernel bases only).
    pub column_means: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenBasis {
    /// N x L, one Moran eigenvector per column.
    pub vectors: DMatrix<f64>,
    /// L positive eigenvalues in non-increasing order.
    pub eigenvalues: DVector<f64>,
    pub source: BasisSource,
    pub site_ids: Option<Vec<String>>,
}

impl EigenBasis {
    pub fn n_sites(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn n_vectors(&self) -> usize {
        self.vectors.ncols()
    }

    /// Keeps only the leading `l` eigenpairs.
    pub fn truncated(&self, l: usize) -> EigenBasis {
        let l = l.min(self.n_vectors());
        EigenBasis {
            vectors: self.vectors.columns(0, l).into_owned(),
            eigenvalues: self.eigenvalues.rows(0, l).into_owned(),
            source: self.source.clone(),
            site_ids: self.site_ids.clone(),
        }
    }

    /// A basis with no eigenvectors over `n` sites (no spatial process).
    pub fn empty(n: usize) -> EigenBasis {
        EigenBasis {
            vectors: DMatrix::zeros(n, 0),
            eigenvalues: DVector::zeros(0),
            source: BasisSource {
                kind: ProximityKind::UserSupplied,
                coords: None,
                column_means: None,
            },
            site_ids: None,
        }
    }

    /// Moran's I of a pattern `E g` relative to its maximum attainable value.
    ///
    /// For a pattern in the span of the basis, `f' C f = f' MCM f =
    /// sum(lambda_l g_l^2)`, so the ratio needs no access to `C`.
    pub fn moran_ratio(&self, coefficients: &[f64]) -> f64 {
        let ss: f64 = coefficients.iter().map(|g| g * g).sum();
        if ss == 0.0 || self.eigenvalues.is_empty() {
            return f64::NAN;
        }
        let num: f64 = coefficients
            .iter()
            .zip(self.eigenvalues.iter())
            .map(|(g, l)| l * g * g)
            .sum();
        num / (self.eigenvalues[0] * ss)
    }
}

/// Extracts the Moran eigenvector basis, keeping eigenpairs with
/// `lambda_l >= threshold * lambda_1` and `lambda_l > 0`.
pub fn extract_basis(prox: &ProximityMatrix, threshold: f64) -> Result<EigenBasis> {
    extract_basis_limited(prox, threshold, None)
}

/// As [`extract_basis`], additionally capping the number of eigenpairs.
pub fn extract_basis_limited(
    prox: &ProximityMatrix,
    threshold: f64,
    max_vectors: Option<usize>,
) -> Result<EigenBasis> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::invalid(format!(
            "threshold {threshold} outside [0, 1)"
        )));
    }
    let c = prox.values();
    let n = c.nrows();
    let col_means: Vec<f64> = (0..n).map(|j| c.column(j).sum() / n as f64).collect();
    let grand = col_means.iter().sum::<f64>() / n as f64;
    // C is symmetric, so row means equal column means.
    let mcm = DMatrix::from_fn(n, n, |i, j| c[(i, j)] - col_means[i] - col_means[j] + grand);
    let (values, vectors) = sym_eigen_desc(mcm);
    let lead = values[0];
    // Round-off can leave a tiny positive value on a spectrum that is
    // otherwise non-positive; judge it against the spectral magnitude.
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(lead > POSITIVE_TOL * scale) {
        return Err(Error::NoPositiveEigenvalue);
    }
    let mut keep = values
        .iter()
        .take_while(|&&v| v > POSITIVE_TOL * lead && v >= threshold * lead)
        .count();
    if let Some(m) = max_vectors {
        keep = keep.min(m);
    }
    let kernel = matches!(prox.kind(), ProximityKind::ExponentialKernel { .. });
    Ok(EigenBasis {
        vectors: vectors.columns(0, keep).into_owned(),
        eigenvalues: values.rows(0, keep).into_owned(),
        source: BasisSource {
            kind: prox.kind().clone(),
            coords: prox.coords().cloned(),
            column_means: kernel.then_some(col_means),
        },
        site_ids: prox.site_ids().map(|s| s.to_vec()),
    })
}

/// Eigenvector values at prediction sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedBasis {
    /// M x L.
    pub vectors0: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
}

/// Nyström extension of a kernel basis to new sites.
///
/// The extension treats each site as fully similar to itself: with the unit
/// diagonal restored, the centered kernel is `MCM + M`, which has the same
/// eigenvectors and eigenvalues `lambda + 1`. Hence
/// `vectors0 = (C0 - 1 c_bar') E diag(1 / (lambda + 1))`, where `C0` is the
/// prediction-by-training kernel `exp(-d / r)` with the training range and
/// `c_bar` the training column means. At a training site this reproduces the
/// training basis exactly, and components with small eigenvalues are not
/// inflated away from the data.
pub fn extend_basis(basis: &EigenBasis, coords0: &CoordinateSet) -> Result<ExtendedBasis> {
    extend_basis_with(basis, coords0, Parallelism::default())
}

pub fn extend_basis_with(
    basis: &EigenBasis,
    coords0: &CoordinateSet,
    parallelism: Parallelism,
) -> Result<ExtendedBasis> {
    let range = match basis.source.kind {
        ProximityKind::ExponentialKernel { range } => range,
        _ => return Err(Error::ExtensionRequiresKernel),
    };
    let (Some(train), Some(means)) = (&basis.source.coords, &basis.source.column_means) else {
        return Err(Error::ExtensionRequiresKernel);
    };
    if coords0.is_empty() {
        return Err(Error::invalid("no prediction sites"));
    }
    let l = basis.n_vectors();
    let n = train.len();
    let e = &basis.vectors;
    let lambda = &basis.eigenvalues;
    let rows = map_indices(parallelism, coords0.len(), |m| {
        let s0 = coords0.sites()[m];
        let centered: Vec<f64> = (0..n)
            .map(|j| {
                let d = dist(s0, train.sites()[j]);
                (-d / range).exp() - means[j]
            })
            .collect();
        (0..l)
            .map(|c| {
                let col = e.column(c);
                let acc: f64 = centered.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                acc / (lambda[c] + 1.0)
            })
            .collect::<Vec<f64>>()
    });
    Ok(ExtendedBasis {
        vectors0: DMatrix::from_fn(coords0.len(), l, |i, j| rows[i][j]),
        eigenvalues: lambda.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proximity::{build_contiguity_proximity, build_kernel_proximity};
    use approx::assert_relative_eq;

    fn scatter(n: usize) -> CoordinateSet {
        let pts = (0..n)
            .map(|i| {
                let t = i as f64;
                [
                    (t * 2.39).sin() * 50.0 + t,
                    (t * 1.13).cos() * 40.0 - 0.5 * t,
                ]
            })
            .collect();
        CoordinateSet::new(pts, None).unwrap()
    }

    fn ring(n: usize) -> ProximityMatrix {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            let j = (i + 1) % n;
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        build_contiguity_proximity(a, None).unwrap()
    }

    #[test]
    fn basis_is_centered_and_orthonormal() {
        let prox = build_kernel_proximity(&scatter(40)).unwrap();
        let b = extract_basis(&prox, DEFAULT_THRESHOLD).unwrap();
        assert!(b.n_vectors() >= 1 && b.n_vectors() <= 39);
        let gram = b.vectors.transpose() * &b.vectors;
        let l = b.n_vectors();
        let dev = (gram - DMatrix::identity(l, l)).amax();
        assert!(dev < 1e-8, "orthonormality {dev}");
        for c in 0..l {
            assert!(b.vectors.column(c).sum().abs() < 1e-8);
        }
        for w in b.eigenvalues.as_slice().windows(2) {
            assert!(w[0] >= w[1] && w[1] > 0.0);
        }
    }

    #[test]
    fn raising_threshold_never_adds_vectors() {
        let prox = build_kernel_proximity(&scatter(35)).unwrap();
        let mut last = usize::MAX;
        for t in [0.0, 0.05, 0.1, 0.25, 0.5, 0.9] {
            let l = extract_basis(&prox, t).unwrap().n_vectors();
            assert!(l <= last);
            last = l;
        }
    }

    #[test]
    fn ring_of_four_eigenvalues() {
        // MCM of the 4-cycle has eigenvalues {0 (constant), 0, 0, -2} plus the
        // 2-eigenvalue of C is removed... the only positive pair is none: the
        // cycle spectrum is {2, 0, 0, -2} and centering kills the constant 2.
        let err = extract_basis(&ring(4), 0.0).unwrap_err();
        assert_eq!(err, Error::NoPositiveEigenvalue);
        // A 6-ring keeps its two eigenvalues equal to 1.
        let b = extract_basis(&ring(6), 0.0).unwrap();
        assert_eq!(b.n_vectors(), 2);
        assert_relative_eq!(b.eigenvalues[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.eigenvalues[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn nystrom_reproduces_training_vectors() {
        let coords = scatter(30);
        let prox = build_kernel_proximity(&coords).unwrap();
        let b = extract_basis(&prox, 0.0).unwrap();
        let ext = extend_basis(&b, &coords).unwrap();
        assert_eq!(ext.vectors0.ncols(), b.n_vectors());
        let dev = (&ext.vectors0 - &b.vectors).amax();
        assert!(dev < 1e-6, "deviation {dev}");
    }

    #[test]
    fn centre_of_regular_polygon_extends_to_zero() {
        let pts = (0..8)
            .map(|k| {
                let t = k as f64 * std::f64::consts::FRAC_PI_4;
                [t.cos(), t.sin()]
            })
            .collect();
        let oct = CoordinateSet::new(pts, None).unwrap();
        let b = extract_basis(&build_kernel_proximity(&oct).unwrap(), 0.0).unwrap();
        assert!(b.n_vectors() > 0);
        let c0 = CoordinateSet::new_prediction(vec![[0.0, 0.0]], None).unwrap();
        let ext = extend_basis(&b, &c0).unwrap();
        for v in ext.vectors0.iter() {
            assert!(v.abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn zero_diagonal_square_has_no_positive_eigenvalue() {
        let sq =
            CoordinateSet::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], None).unwrap();
        let prox = build_kernel_proximity(&sq).unwrap();
        assert_eq!(
            extract_basis(&prox, 0.0).unwrap_err(),
            Error::NoPositiveEigenvalue
        );
    }

    #[test]
    fn adjacency_basis_cannot_be_extended() {
        let b = extract_basis(&ring(8), 0.0).unwrap();
        let c0 = CoordinateSet::new_prediction(vec![[0.0, 0.0]], None).unwrap();
        assert_eq!(
            extend_basis(&b, &c0).unwrap_err(),
            Error::ExtensionRequiresKernel
        );
    }

    #[test]
    fn moran_ratio_of_leading_vector_is_one() {
        let b = extract_basis(&ring(10), 0.0).unwrap();
        let mut g = vec![0.0; b.n_vectors()];
        g[0] = 2.5;
        assert_relative_eq!(b.moran_ratio(&g), 1.0, epsilon = 1e-12);
        assert!(b.moran_ratio(&vec![0.0; b.n_vectors()]).is_nan());
    }
}

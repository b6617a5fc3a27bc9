//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
///
/// Each eigenvector is flipped so that its largest-magnitude component is
/// positive; ties on magnitude go to the lowest index.
pub fn sym_eigen_desc(m: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        fix_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

pub(crate) fn fix_sign(col: &mut DVector<f64>) {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, v) in col.iter().enumerate() {
        // 1e-12 slack keeps the choice stable when two entries tie up to rounding.
        if v.abs() > best_abs + 1e-12 {
            best_abs = v.abs();
            best = i;
        }
    }
    if col[best] < 0.0 {
        col.neg_mut();
    }
}

/// Cholesky factor with cached log-determinant.
pub struct Chol {
    inner: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Chol {
    pub fn new(m: DMatrix<f64>) -> Option<Self> {
        nalgebra::Cholesky::new(m).map(|inner| Chol { inner })
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self
            .inner
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.inner.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.inner.inverse()
    }
}

/// Finds columns of `x` that are (numerically) linear combinations of
/// earlier columns, using modified Gram-Schmidt.
pub fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let n = x.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..x.ncols() {
        let mut v = x.column(j).into_owned();
        let norm0 = v.norm();
        for q in &basis {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= 1e-9 * norm0.max(1e-300) * (n as f64).sqrt() {
            bad.push(j);
        } else {
            basis.push(v / norm);
        }
    }
    bad
}

/// Ordinary (optionally weighted) least squares.
pub struct Ols {
    pub coef: DVector<f64>,
    pub rss: f64,
    pub xtx_inv: DMatrix<f64>,
    pub log_det_xtx: f64,
}

pub fn ols(x: &DMatrix<f64>, y: &[f64], weights: Option<&[f64]>) -> Result<Ols> {
    let n = x.nrows();
    let p = x.ncols();
    let mut xw = x.clone();
    let mut yw = DVector::from_column_slice(y);
    if let Some(w) = weights {
        for i in 0..n {
            let s = w[i].sqrt();
            xw.row_mut(i).scale_mut(s);
            yw[i] *= s;
        }
    }
    let xtx = xw.transpose() * &xw;
    let chol = Chol::new(xtx).ok_or_else(|| {
        Error::RankDeficient(collinear_columns(x).iter().map(|j| j.to_string()).collect())
    })?;
    let coef = chol.solve(&(xw.transpose() * &yw));
    let resid = &yw - &xw * &coef;
    let _ = p;
    Ok(Ols {
        rss: resid.norm_squared(),
        xtx_inv: chol.inverse(),
        log_det_xtx: chol.log_det(),
        coef,
    })
}

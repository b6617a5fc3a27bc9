//! Restricted likelihood of the mixed model on the working scale.
//!
//! With random coefficients `gamma ~ N(0, sigma^2 diag(v))`, write
//! `W = [X, Z diag(sqrt v)]` and `M = W'W + blockdiag(0, I)`. Then
//!
//! `-2 l_R = log|M| + (n - nx) (1 + log(2 pi dd / (n - nx)))`
//!
//! with `b = M^-1 W'z` and `dd = z'z - b'W'z`, the penalized residual sum
//! of squares; `sigma^2` is profiled out as `dd / (n - nx)`. Observation
//! weights scale the rows by `sqrt(w)` and add `sum(log w) / 2`.
//!
//! Fixed-effect columns are normalized to unit length before solving, which
//! makes the optimized objective invariant to covariate units. The returned
//! `neg2_loglik` omits the resulting constant [`Engine::log_det_shift`].

use nalgebra::{DMatrix, DVector};

use crate::linalg::Chol;

pub(crate) struct Engine {
    pub n: usize,
    pub nx: usize,
    /// Row-weighted full design.
    pub w0: DMatrix<f64>,
    /// `w0' w0`, computed once.
    pub cross: DMatrix<f64>,
    pub sqrt_w: Option<Vec<f64>>,
    pub sum_log_w: f64,
    /// Reciprocal norms of the weighted fixed-effect columns.
    pub fixed_scale: Vec<f64>,
    /// Add to `neg2_loglik` for the likelihood on the original columns.
    pub log_det_shift: f64,
}

pub(crate) struct Solution {
    pub neg2_loglik: f64,
    /// Coefficients in scaled coordinates.
    pub b: DVector<f64>,
    pub chol: Chol,
    /// Column scales `[1 / |x_j|, sqrt v]`.
    pub scale: Vec<f64>,
}

impl Engine {
    pub fn new(design: DMatrix<f64>, nx: usize, weights: Option<&[f64]>) -> Engine {
        let n = design.nrows();
        let mut w0 = design;
        let mut sqrt_w = None;
        let mut sum_log_w = 0.0;
        if let Some(w) = weights {
            let s: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
            for (i, si) in s.iter().enumerate() {
                w0.row_mut(i).scale_mut(*si);
            }
            sum_log_w = w.iter().map(|v| v.ln()).sum();
            sqrt_w = Some(s);
        }
        let cross = w0.tr_mul(&w0);
        let fixed_scale: Vec<f64> = (0..nx)
            .map(|j| {
                let norm = cross[(j, j)].sqrt();
                if norm > 0.0 {
                    1.0 / norm
                } else {
                    1.0
                }
            })
            .collect();
        let log_det_shift = -2.0 * fixed_scale.iter().map(|s| s.ln()).sum::<f64>();
        Engine {
            n,
            nx,
            w0,
            cross,
            sqrt_w,
            sum_log_w,
            fixed_scale,
            log_det_shift,
        }
    }

    pub fn ncol(&self) -> usize {
        self.cross.nrows()
    }

    /// Solves the penalized system for response `z` and relative random
    /// effect variances `v` (one per random column).
    pub fn solve(&self, z: &[f64], v: &[f64]) -> Option<Solution> {
        let k = self.ncol();
        debug_assert_eq!(v.len(), k - self.nx);
        let mut zt = DVector::from_column_slice(z);
        if let Some(s) = &self.sqrt_w {
            for (a, b) in zt.iter_mut().zip(s) {
                *a *= b;
            }
        }
        let m0 = self.w0.tr_mul(&zt);
        let scale: Vec<f64> = (0..k)
            .map(|j| {
                if j < self.nx {
                    self.fixed_scale[j]
                } else {
                    v[j - self.nx].sqrt()
                }
            })
            .collect();
        let mut mm = DMatrix::from_fn(k, k, |i, j| scale[i] * scale[j] * self.cross[(i, j)]);
        for j in self.nx..k {
            mm[(j, j)] += 1.0;
        }
        let m = DVector::from_fn(k, |i, _| scale[i] * m0[i]);
        let chol = Chol::new(mm)?;
        let b = chol.solve(&m);
        let dd = zt.norm_squared() - b.dot(&m);
        let df = (self.n - self.nx) as f64;
        if !(dd > 0.0) {
            return None;
        }
        let neg2 = chol.log_det() + df * (1.0 + (2.0 * std::f64::consts::PI * dd / df).ln())
            - self.sum_log_w;
        neg2.is_finite().then_some(Solution {
            neg2_loglik: neg2,
            b,
            chol,
            scale,
        })
    }
}

//! Fixed and random design columns.
//!
//! Column layout of the full design, in order:
//!
//! 1. fixed: intercept, SVC covariates, constant covariates;
//! 2. one spatial block per varying coefficient (intercept first), holding
//!    `x_k * e_l` for every eigenvector;
//! 3. one NVC block per SVC covariate when enabled, `x_k * N_j(x_k)`;
//! 4. the group block in sum-to-zero coding.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::EigenBasis;
use crate::error::{Error, Result};
use crate::linalg::{collinear_columns, ols};
use crate::stats::{quantile_sorted, sd};

pub const INTERCEPT: &str = "(Intercept)";

/// Number of interior spline knots for NVC terms.
const NVC_INTERIOR_KNOTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BlockKind {
    /// Spatial process on fixed coefficient `coef` (0 is the intercept).
    Spatial {
        coef: usize,
    },
    /// Non-spatial varying part of SVC covariate `coef` (index into fixed).
    Nvc {
        coef: usize,
    },
    Group,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub start: usize,
    pub len: usize,
}

/// Natural cubic spline in a covariate's own value with the constant and
/// linear parts projected out and unit-variance columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NvcBasis {
    pub knots: Vec<f64>,
    /// Raw spline columns kept after dropping degenerate ones.
    pub kept: Vec<usize>,
    /// Per kept column: intercept and slope of the projection on `[1, x]`.
    pub projection: Vec<(f64, f64)>,
    pub scale: Vec<f64>,
    pub range: (f64, f64),
}

impl NvcBasis {
    /// Builds the basis from training values; `None` when the covariate has
    /// too few distinct values to carry a smooth term.
    pub fn fit(x: &[f64]) -> Option<NvcBasis> {
        let mut s = x.to_vec();
        s.sort_by(|a, b| a.total_cmp(b));
        let nk = NVC_INTERIOR_KNOTS + 2;
        let mut knots: Vec<f64> = (0..nk)
            .map(|i| quantile_sorted(&s, i as f64 / (nk - 1) as f64))
            .collect();
        knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        if knots.len() < 3 {
            return None;
        }
        let n = x.len();
        let raw_cols = knots.len() - 2;
        let raw = DMatrix::from_fn(n, raw_cols, |i, j| raw_spline(&knots, x[i])[j]);
        let lin = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
        let mut kept = Vec::new();
        let mut projection = Vec::new();
        let mut scale = Vec::new();
        let mut resid_cols = Vec::new();
        for j in 0..raw_cols {
            let col: Vec<f64> = raw.column(j).iter().copied().collect();
            let Ok(fit) = ols(&lin, &col, None) else {
                return None;
            };
            let r: Vec<f64> = (0..n)
                .map(|i| col[i] - fit.coef[0] - fit.coef[1] * x[i])
                .collect();
            let s = sd(&r);
            if !(s > 1e-10 * sd(&col).max(1e-300)) {
                continue;
            }
            kept.push(j);
            projection.push((fit.coef[0], fit.coef[1]));
            scale.push(s);
            resid_cols.push(r);
        }
        if kept.is_empty() {
            return None;
        }
        let m = DMatrix::from_fn(n, kept.len(), |i, j| resid_cols[j][i]);
        let bad = collinear_columns(&m);
        if !bad.is_empty() {
            let keep: Vec<usize> = (0..kept.len()).filter(|j| !bad.contains(j)).collect();
            kept = keep.iter().map(|&j| kept[j]).collect();
            projection = keep.iter().map(|&j| projection[j]).collect();
            scale = keep.iter().map(|&j| scale[j]).collect();
        }
        let range = (s[0], s[n - 1]);
        Some(NvcBasis {
            knots,
            kept,
            projection,
            scale,
            range,
        })
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        let raw = raw_spline(&self.knots, x);
        self.kept
            .iter()
            .enumerate()
            .map(|(c, &j)| {
                let (a, b) = self.projection[c];
                (raw[j] - a - b * x) / self.scale[c]
            })
            .collect()
    }

    pub fn deriv(&self, x: f64) -> Vec<f64> {
        let raw = raw_spline_deriv(&self.knots, x);
        self.kept
            .iter()
            .enumerate()
            .map(|(c, &j)| (raw[j] - self.projection[c].1) / self.scale[c])
            .collect()
    }

    /// True when `x` lies outside the training range (linear extrapolation).
    pub fn extrapolates(&self, x: f64) -> bool {
        x < self.range.0 || x > self.range.1
    }
}

fn cube_plus(t: f64) -> f64 {
    if t > 0.0 {
        t * t * t
    } else {
        0.0
    }
}

fn sq_plus(t: f64) -> f64 {
    if t > 0.0 {
        t * t
    } else {
        0.0
    }
}

/// Truncated-power natural cubic spline columns `d_k - d_{K-2}`.
fn raw_spline(knots: &[f64], x: f64) -> Vec<f64> {
    let k = knots.len();
    let last = knots[k - 1];
    let d = |j: usize| (cube_plus(x - knots[j]) - cube_plus(x - last)) / (last - knots[j]);
    let dk = d(k - 2);
    (0..k - 2).map(|j| d(j) - dk).collect()
}

fn raw_spline_deriv(knots: &[f64], x: f64) -> Vec<f64> {
    let k = knots.len();
    let last = knots[k - 1];
    let d = |j: usize| 3.0 * (sq_plus(x - knots[j]) - sq_plus(x - last)) / (last - knots[j]);
    let dk = d(k - 2);
    (0..k - 2).map(|j| d(j) - dk).collect()
}

/// Column structure of a fitted model; everything needed to rebuild design
/// rows for new observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    /// Fixed-effect names: intercept, SVC covariates, constant covariates.
    pub fixed_names: Vec<String>,
    pub n_svc: usize,
    /// One entry per SVC covariate; `None` when NVC is off or not estimable.
    pub nvc: Vec<Option<NvcBasis>>,
    pub group_levels: Option<Vec<String>>,
    pub blocks: Vec<Block>,
    pub n_basis: usize,
    pub nx: usize,
    pub ncol: usize,
}

impl Design {
    pub fn build(
        svc: &[String],
        consts: &[String],
        columns: &[&[f64]],
        nvc_enabled: bool,
        n_basis: usize,
        group_levels: Option<Vec<String>>,
    ) -> Design {
        let mut fixed_names = vec![INTERCEPT.to_string()];
        fixed_names.extend(svc.iter().cloned());
        fixed_names.extend(consts.iter().cloned());
        let nx = fixed_names.len();
        let mut blocks = Vec::new();
        let mut at = nx;
        if n_basis > 0 {
            for coef in 0..=svc.len() {
                blocks.push(Block {
                    kind: BlockKind::Spatial { coef },
                    start: at,
                    len: n_basis,
                });
                at += n_basis;
            }
        }
        let nvc: Vec<Option<NvcBasis>> = (0..svc.len())
            .map(|k| {
                if nvc_enabled {
                    NvcBasis::fit(columns[k])
                } else {
                    None
                }
            })
            .collect();
        for (k, b) in nvc.iter().enumerate() {
            if let Some(b) = b {
                blocks.push(Block {
                    kind: BlockKind::Nvc { coef: k + 1 },
                    start: at,
                    len: b.len(),
                });
                at += b.len();
            }
        }
        if let Some(levels) = &group_levels {
            let len = levels.len() - 1;
            blocks.push(Block {
                kind: BlockKind::Group,
                start: at,
                len,
            });
            at += len;
        }
        Design {
            fixed_names,
            n_svc: svc.len(),
            nvc,
            group_levels,
            blocks,
            n_basis,
            nx,
            ncol: at,
        }
    }

    /// Full design row. `fixed` holds the covariates without the intercept
    /// (SVC first, then constant), `e` the basis row, `group` the level index.
    pub fn row(&self, fixed: &[f64], e: &[f64], group: Option<usize>) -> Vec<f64> {
        let mut r = vec![0.0; self.ncol];
        r[0] = 1.0;
        r[1..self.nx].copy_from_slice(fixed);
        for b in &self.blocks {
            match b.kind {
                BlockKind::Spatial { coef } => {
                    let xk = r[coef];
                    for l in 0..b.len {
                        r[b.start + l] = xk * e[l];
                    }
                }
                BlockKind::Nvc { coef } => {
                    let xk = r[coef];
                    let nb = self.nvc[coef - 1]
                        .as_ref()
                        .expect("nvc block without basis");
                    for (l, v) in nb.eval(xk).into_iter().enumerate() {
                        r[b.start + l] = xk * v;
                    }
                }
                BlockKind::Group => {
                    if let Some(g) = group {
                        if g == b.len {
                            r[b.start..b.start + b.len]
                                .iter_mut()
                                .for_each(|v| *v = -1.0);
                        } else if g < b.len {
                            r[b.start + g] = 1.0;
                        }
                    }
                }
            }
        }
        r
    }

    /// Loading vector of the varying coefficient on fixed column `coef` at
    /// an observation: `beta_ik = a . coef_full`.
    pub fn coef_loading(&self, coef: usize, xk: f64, e: &[f64]) -> Vec<f64> {
        let mut a = vec![0.0; self.ncol];
        a[coef] = 1.0;
        for b in &self.blocks {
            match b.kind {
                BlockKind::Spatial { coef: c } if c == coef => {
                    a[b.start..b.start + b.len].copy_from_slice(&e[..b.len]);
                }
                BlockKind::Nvc { coef: c } if c == coef => {
                    let nb = self.nvc[coef - 1]
                        .as_ref()
                        .expect("nvc block without basis");
                    for (l, v) in nb.eval(xk).into_iter().enumerate() {
                        a[b.start + l] = v;
                    }
                }
                _ => {}
            }
        }
        a
    }

    /// Loading of `d(x_k beta_k(x_k)) / d x_k` beyond `beta_k` itself, i.e.
    /// `x_k N'(x_k)` on the NVC block.
    pub fn nvc_slope_loading(&self, coef: usize, xk: f64) -> Option<Vec<f64>> {
        let b = self
            .blocks
            .iter()
            .find(|b| b.kind == BlockKind::Nvc { coef })?;
        let nb = self.nvc[coef - 1].as_ref()?;
        let mut a = vec![0.0; self.ncol];
        for (l, v) in nb.deriv(xk).into_iter().enumerate() {
            a[b.start + l] = xk * v;
        }
        Some(a)
    }

    pub fn group_index(&self, level: &str) -> Option<usize> {
        self.group_levels.as_ref()?.iter().position(|l| l == level)
    }

    pub fn block_name(&self, b: &Block) -> String {
        match b.kind {
            BlockKind::Spatial { coef } | BlockKind::Nvc { coef } => self.fixed_names[coef].clone(),
            BlockKind::Group => "group".to_string(),
        }
    }
}

/// Enumerates group levels in order of first appearance.
pub fn group_levels(group: &[String]) -> Vec<String> {
    let mut levels: Vec<String> = Vec::new();
    for g in group {
        if !levels.contains(g) {
            levels.push(g.clone());
        }
    }
    levels
}

/// Checks the fixed design for collinearity, naming offending columns.
pub fn check_rank(names: &[String], x: &DMatrix<f64>) -> Result<()> {
    let bad = collinear_columns(x);
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::RankDeficient(
            bad.iter().map(|&j| names[j].clone()).collect(),
        ))
    }
}

/// Basis row of observation `i`.
pub fn basis_row(basis: &EigenBasis, site_index: Option<&[usize]>, i: usize) -> Vec<f64> {
    let r = site_index.map_or(i, |s| s[i]);
    basis.vectors.row(r).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spline_is_linear_beyond_boundary() {
        let x: Vec<f64> = (0..100)
            .map(|i| (i as f64 * 0.37).sin() * 5.0 + i as f64 * 0.1)
            .collect();
        let nb = NvcBasis::fit(&x).unwrap();
        assert_eq!(nb.len(), 5);
        let hi = nb.range.1;
        let a = nb.eval(hi + 1.0);
        let b = nb.eval(hi + 2.0);
        let c = nb.eval(hi + 3.0);
        for j in 0..nb.len() {
            assert_relative_eq!(b[j] - a[j], c[j] - b[j], epsilon = 1e-8);
        }
        assert!(nb.extrapolates(hi + 1.0));
    }

    #[test]
    fn spline_columns_are_centered_and_unit_sd() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 7919) % 211) as f64 / 3.0).collect();
        let nb = NvcBasis::fit(&x).unwrap();
        for j in 0..nb.len() {
            let col: Vec<f64> = x.iter().map(|&v| nb.eval(v)[j]).collect();
            assert!(crate::stats::mean(&col).abs() < 1e-9);
            assert_relative_eq!(sd(&col), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn spline_derivative_matches_difference() {
        let x: Vec<f64> = (0..80).map(|i| i as f64 * 0.5).collect();
        let nb = NvcBasis::fit(&x).unwrap();
        for &t in &[3.3, 17.0, 29.9] {
            let h = 1e-5;
            let d = nb.deriv(t);
            let (p, m) = (nb.eval(t + h), nb.eval(t - h));
            for j in 0..nb.len() {
                assert_relative_eq!(d[j], (p[j] - m[j]) / (2.0 * h), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn binary_covariate_has_no_smooth_term() {
        let x: Vec<f64> = (0..50).map(|i| (i % 2) as f64).collect();
        assert!(NvcBasis::fit(&x).is_none());
    }

    #[test]
    fn group_coding_sums_to_zero() {
        let d = Design::build(
            &[],
            &[],
            &[],
            false,
            0,
            Some(vec!["a".into(), "b".into(), "c".into()]),
        );
        assert_eq!(d.ncol, 3);
        assert_eq!(d.row(&[], &[], Some(0)), vec![1.0, 1.0, 0.0]);
        assert_eq!(d.row(&[], &[], Some(2)), vec![1.0, -1.0, -1.0]);
        assert_eq!(d.row(&[], &[], None), vec![1.0, 0.0, 0.0]);
    }
}

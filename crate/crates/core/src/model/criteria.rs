//! Information criteria, fit statistics and the null model.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::FittedModel;
use crate::error::Result;
use crate::linalg::ols;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoCriteria {
    pub rloglik: f64,
    pub aic: f64,
    pub bic: f64,
    /// Declared parameter count.
    pub p: usize,
    pub n_eff: usize,
    /// Contribution of each parameter group to `p`.
    pub breakdown: Vec<(String, usize)>,
}

impl InfoCriteria {
    pub fn new(rloglik: f64, breakdown: Vec<(String, usize)>, n_eff: usize) -> Self {
        let p = breakdown.iter().map(|(_, k)| k).sum();
        let (aic, bic) = aic_bic(rloglik, p, n_eff);
        InfoCriteria {
            rloglik,
            aic,
            bic,
            p,
            n_eff,
            breakdown,
        }
    }
}

pub fn aic_bic(loglik: f64, p: usize, n: usize) -> (f64, f64) {
    let m2 = -2.0 * loglik;
    (m2 + 2.0 * p as f64, m2 + p as f64 * (n as f64).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub resid_se: f64,
    pub adj_r2_cond: f64,
    /// Count regimes only.
    pub dispersion: Option<f64>,
    /// Count regimes only, in percent.
    pub deviance_explained: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModel {
    pub description: String,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub p: usize,
}

pub fn info_criteria(model: &FittedModel) -> InfoCriteria {
    model.criteria.clone()
}

pub fn fit_statistics(model: &FittedModel) -> FitStats {
    model.fit_stats.clone()
}

/// Linear regression on the raw response (continuous) or a weighted
/// log-linear regression with offset on the started-log scale (counts),
/// each by maximum likelihood.
pub(crate) fn null_model(
    y: &[f64],
    x: &DMatrix<f64>,
    count: Option<(f64, Option<&[f64]>)>,
) -> Result<NullModel> {
    let n = y.len();
    let p = x.ncols() + 1;
    let two_pi = 2.0 * std::f64::consts::PI;
    let (loglik, description) = match count {
        None => {
            let fit = ols(x, y, None)?;
            (
                -0.5 * n as f64 * (1.0 + (two_pi * fit.rss / n as f64).ln()),
                "linear regression".to_string(),
            )
        }
        Some((delta, lo)) => {
            let z: Vec<f64> = (0..n)
                .map(|i| (y[i] + delta).ln() - lo.map_or(0.0, |o| o[i]))
                .collect();
            let w: Vec<f64> = y.iter().map(|v| v + delta).collect();
            let fit = ols(x, &z, Some(&w))?;
            let ll = -0.5 * n as f64 * (1.0 + (two_pi * fit.rss / n as f64).ln())
                + 0.5 * w.iter().map(|v| v.ln()).sum::<f64>();
            let d = if lo.is_some() {
                "log-linear count regression with offset"
            } else {
                "log-linear count regression"
            };
            (ll, d.to_string())
        }
    };
    let (aic, bic) = aic_bic(loglik, p, n);
    Ok(NullModel {
        description,
        loglik,
        aic,
        bic,
        p,
    })
}

/// Poisson deviance `2 sum(y log(y / mu) - (y - mu))`.
pub(crate) fn poisson_deviance(y: &[f64], mu: &[f64]) -> f64 {
    2.0 * y
        .iter()
        .zip(mu)
        .map(|(&yi, &mi)| {
            let t = if yi > 0.0 { yi * (yi / mi).ln() } else { 0.0 };
            t - (yi - mi)
        })
        .sum::<f64>()
}

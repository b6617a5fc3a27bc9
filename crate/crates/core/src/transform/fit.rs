//! Stand-alone chain fitting against a fixed linear predictor design.

use nalgebra::DMatrix;

use super::{Regime, TransformChain, TransformSpec};
use crate::error::{Error, Result};
use crate::linalg::ols;
use crate::optim::{minimize, OptimOptions};
use crate::parallel::Parallelism;

#[derive(Debug, Clone)]
pub struct ChainFit {
    pub chain: TransformChain,
    pub params: Vec<f64>,
    /// Restricted log-likelihood of the transformed response, Jacobian included.
    pub loglik: f64,
    /// Transformed training response.
    pub z: Vec<f64>,
}

/// Fits the transformation parameters by maximizing the Gaussian restricted
/// likelihood of the transformed response under a linear model with the
/// given design (intercept only when `None`). SAL layers are grown one at a
/// time, each fit warm-started from the previous depth.
pub fn fit_chain(
    y: &[f64],
    spec: &TransformSpec,
    design: Option<&DMatrix<f64>>,
    parallelism: Parallelism,
) -> Result<ChainFit> {
    let mut path = fit_chain_path(y, spec, design, parallelism)?;
    Ok(path.pop().expect("path holds depth 0"))
}

/// As [`fit_chain`], returning the fit at every depth `0..=spec.tr_num`.
pub fn fit_chain_path(
    y: &[f64],
    spec: &TransformSpec,
    design: Option<&DMatrix<f64>>,
    parallelism: Parallelism,
) -> Result<Vec<ChainFit>> {
    spec.check_response(y)?;
    let n = y.len();
    let x = design
        .cloned()
        .unwrap_or_else(|| DMatrix::from_element(n, 1, 1.0));
    if x.nrows() != n {
        return Err(Error::invalid("design rows differ from response length"));
    }
    if n <= x.ncols() + 1 {
        return Err(Error::invalid("too few observations for the design"));
    }
    let weights: Option<Vec<f64>> = spec
        .is_count()
        .then(|| y.iter().map(|v| v + spec.delta).collect());
    let opts = OptimOptions {
        parallelism,
        ..Default::default()
    };

    let base = TransformSpec { tr_num: 0, ..*spec };
    let mut path = vec![fit_one(
        y,
        &base,
        &x,
        weights.as_deref(),
        &[base.initial_params(false), base.initial_params(true)],
        &opts,
    )?];
    for d in 1..=spec.tr_num {
        let prev = TransformSpec {
            tr_num: d - 1,
            ..*spec
        };
        let cur = TransformSpec { tr_num: d, ..*spec };
        let warm = prev.grow_params(&path[d - 1].params);
        let starts = [warm, cur.initial_params(true)];
        path.push(fit_one(y, &cur, &x, weights.as_deref(), &starts, &opts)?);
    }
    Ok(path)
}

fn objective(
    y: &[f64],
    spec: &TransformSpec,
    x: &DMatrix<f64>,
    weights: Option<&[f64]>,
    params: &[f64],
) -> Result<(f64, TransformChain, Vec<f64>)> {
    let (chain, z, mut log_jac) = spec.build(params, y, None)?;
    if spec.is_count() {
        // The count layer's Jacobian does not depend on any parameter.
        log_jac += y.iter().map(|v| (v + spec.delta).ln()).sum::<f64>();
    }
    let fit = ols(x, &z, weights)?;
    let n = y.len() as f64;
    let p = x.ncols() as f64;
    let mut ll = -0.5
        * ((n - p) * (1.0 + (2.0 * std::f64::consts::PI * fit.rss / (n - p)).ln())
            + fit.log_det_xtx);
    if let Some(w) = weights {
        ll += 0.5 * w.iter().map(|v| v.ln()).sum::<f64>();
    }
    ll += log_jac;
    if spec.regime() == Regime::BoxCox {
        // Evaluate the likelihood on the standardized scale.
        ll -= p * crate::stats::sd(&z).ln();
    }
    Ok((ll, chain, z))
}

fn fit_one(
    y: &[f64],
    spec: &TransformSpec,
    x: &DMatrix<f64>,
    weights: Option<&[f64]>,
    starts: &[Vec<f64>],
    opts: &OptimOptions,
) -> Result<ChainFit> {
    let f = |p: &[f64]| match objective(y, spec, x, weights, p) {
        Ok((ll, _, _)) => -ll,
        Err(_) => f64::NAN,
    };
    let mut best: Option<(Vec<f64>, f64, bool, usize, f64)> = None;
    for s in starts {
        let r = minimize(f, s, opts);
        if best.as_ref().is_none_or(|b| r.value < b.1) {
            best = Some((r.x, r.value, r.converged, r.iterations, r.grad_norm));
        }
    }
    let (params, value, converged, iterations, grad_norm) = best.expect("at least one start");
    if !value.is_finite() || !converged {
        return Err(Error::NonConvergence {
            iterations,
            grad_norm,
            best_value: value,
            best_params: params,
        });
    }
    let (loglik, chain, z) = objective(y, spec, x, weights, &params)?;
    Ok(ChainFit {
        chain,
        params,
        loglik,
        z,
    })
}

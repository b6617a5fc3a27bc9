//! Joint optimization of transformation and variance parameters.

use nalgebra::{DMatrix, DVector};

use super::criteria::{null_model, poisson_deviance, FitStats, InfoCriteria};
use super::design::{basis_row, check_rank, group_levels, BlockKind, Design};
use super::reml::{Engine, Solution};
use super::{
    Coefficient, FitOptions, FittedModel, GroupEffect, InSample, ModelData, ModelSpec,
    ProcessVariance, SvcCoefficient, Training, VarianceParams,
};
use crate::basis::EigenBasis;
use crate::error::{Error, Result};
use crate::inference::QuantileTable;
use crate::optim::{minimize, OptimOptions};
use crate::parallel::map_indices;
use crate::stats::{sd, two_sided_p};
use crate::transform::{Regime, TransformChain, TransformSpec};

/// Variance parameters of one random block: `s` and, for spatial
/// processes, `alpha`.
#[derive(Debug, Clone, Copy)]
struct Slot {
    block: usize,
    at: usize,
    spatial: bool,
}

struct Problem<'a> {
    y: &'a [f64],
    log_offset: Option<Vec<f64>>,
    weights: Option<Vec<f64>>,
    design: Design,
    xfull: DMatrix<f64>,
    engine: Engine,
    eigenvalues: Vec<f64>,
    sum_eigen: f64,
    slots: Vec<Slot>,
    n_var: usize,
    alpha_bounds: (f64, f64),
    count_jacobian: f64,
    site_index: Option<Vec<usize>>,
}

struct Eval {
    loglik: f64,
    chain: TransformChain,
    z: Vec<f64>,
    sol: Solution,
}

impl<'a> Problem<'a> {
    fn rel_variances(&self, var: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.design.ncol - self.design.nx];
        for slot in &self.slots {
            let b = &self.design.blocks[slot.block];
            let s2 = var[slot.at] * var[slot.at];
            let off = b.start - self.design.nx;
            if slot.spatial {
                let a = var[slot.at + 1].clamp(self.alpha_bounds.0, self.alpha_bounds.1);
                let pw: Vec<f64> = self.eigenvalues.iter().map(|l| l.powf(a)).collect();
                let norm = self.sum_eigen / pw.iter().sum::<f64>();
                for l in 0..b.len {
                    v[off + l] = s2 * pw[l] * norm;
                }
            } else {
                v[off..off + b.len].iter_mut().for_each(|x| *x = s2);
            }
        }
        v
    }

    fn eval(&self, tspec: &TransformSpec, theta: &[f64]) -> Option<Eval> {
        let nt = tspec.n_params();
        let (chain, z, log_jac) = tspec
            .build(&theta[..nt], self.y, self.log_offset.as_deref())
            .ok()?;
        let v = self.rel_variances(&theta[nt..]);
        let sol = self.engine.solve(&z, &v)?;
        let adj = match tspec.regime() {
            Regime::Gaussian | Regime::Count => 0.0,
            Regime::BoxCox => log_jac - self.design.nx as f64 * sd(&z).ln(),
            Regime::Sal | Regime::BoxCoxSal => log_jac,
            Regime::CountSal => log_jac - self.count_jacobian,
        };
        let loglik = -0.5 * sol.neg2_loglik + adj;
        loglik.is_finite().then_some(Eval {
            loglik,
            chain,
            z,
            sol,
        })
    }

    fn initial_var(&self, perturbed: bool) -> Vec<f64> {
        let mut v = vec![0.0; self.n_var];
        for slot in &self.slots {
            let kind = self.design.blocks[slot.block].kind;
            let s = match kind {
                BlockKind::Spatial { coef: 0 } => 1.0,
                BlockKind::Group => 0.5,
                _ => 0.3,
            };
            v[slot.at] = if perturbed { 0.5 * s } else { s };
            if slot.spatial {
                v[slot.at + 1] = if perturbed { 2.0 } else { 1.0 };
            }
        }
        v
    }
}

pub(super) fn fit_model(
    data: &ModelData,
    spec: &ModelSpec,
    basis: &EigenBasis,
    opts: &FitOptions,
    svc_model: bool,
) -> Result<FittedModel> {
    let n = data.len();
    let tspec = spec.transform;
    let mut warnings = Vec::new();

    // Validation.
    for s in &spec.svc_columns {
        if spec.const_columns.contains(s) {
            return Err(Error::invalid(format!(
                "column '{s}' is both varying and constant"
            )));
        }
    }
    let names: Vec<&String> = spec.svc_columns.iter().chain(&spec.const_columns).collect();
    let mut cols: Vec<&[f64]> = Vec::new();
    for name in &names {
        let c = data
            .column(name)
            .ok_or_else(|| Error::invalid(format!("missing covariate column '{name}'")))?;
        if c.len() != n {
            return Err(Error::invalid(format!(
                "column '{name}' has {} rows, expected {n}",
                c.len()
            )));
        }
        if let Some(i) = c.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value in '{name}' at row {i}"
            )));
        }
        cols.push(c);
    }
    tspec.check_response(&data.response)?;
    let nx = 1 + names.len();
    if n < nx + 2 {
        return Err(Error::invalid(format!(
            "need at least {} observations, got {n}",
            nx + 2
        )));
    }
    let site_index = data.site_index.as_deref();
    match site_index {
        Some(s) => {
            if s.len() != n {
                return Err(Error::invalid("site_index length differs from response"));
            }
            if let Some(i) = s.iter().position(|&r| r >= basis.n_sites()) {
                return Err(Error::invalid(format!(
                    "site_index at row {i} outside the basis"
                )));
            }
        }
        None => {
            if basis.n_sites() != n {
                return Err(Error::invalid(format!(
                    "basis has {} sites but data has {n} rows; supply a site index",
                    basis.n_sites()
                )));
            }
        }
    }
    let log_offset = match &data.offset {
        Some(o) => {
            if o.len() != n {
                return Err(Error::invalid("offset length differs from response"));
            }
            if let Some(i) = o.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::invalid(format!("offset must be positive, row {i}")));
            }
            if tspec.is_count() {
                Some(o.iter().map(|v| v.ln()).collect::<Vec<f64>>())
            } else {
                warnings.push("offset ignored: only count responses use an offset".to_string());
                None
            }
        }
        None => None,
    };
    let (levels, group_idx) = match &data.group {
        Some(g) => {
            if g.len() != n {
                return Err(Error::invalid("group length differs from response"));
            }
            let levels = group_levels(g);
            if levels.len() < 2 {
                warnings.push("group column has a single level and is ignored".to_string());
                (None, None)
            } else {
                let idx: Vec<usize> = g
                    .iter()
                    .map(|v| levels.iter().position(|l| l == v).unwrap())
                    .collect();
                (Some(levels), Some(idx))
            }
        }
        None => (None, None),
    };

    let svc_names: Vec<String> = if svc_model {
        spec.svc_columns.clone()
    } else {
        Vec::new()
    };
    let design = Design::build(
        &svc_names,
        &spec.const_columns,
        &cols,
        spec.nvc_enabled && svc_model,
        basis.n_vectors(),
        levels,
    );
    let x_rows: Vec<Vec<f64>> = (0..n)
        .map(|i| cols.iter().map(|c| c[i]).collect())
        .collect();
    let xfixed = DMatrix::from_fn(n, nx, |i, j| if j == 0 { 1.0 } else { x_rows[i][j - 1] });
    check_rank(&design.fixed_names, &xfixed)?;

    let rows = map_indices(opts.parallelism, n, |i| {
        let e = basis_row(basis, site_index, i);
        design.row(&x_rows[i], &e, group_idx.as_ref().map(|g| g[i]))
    });
    let xfull = DMatrix::from_fn(n, design.ncol, |i, j| rows[i][j]);
    let weights: Option<Vec<f64>> = tspec
        .is_count()
        .then(|| data.response.iter().map(|v| v + tspec.delta).collect());
    let engine = Engine::new(xfull.clone(), nx, weights.as_deref());

    let mut slots = Vec::new();
    let mut at = 0;
    for (bi, b) in design.blocks.iter().enumerate() {
        if b.len == 0 {
            continue;
        }
        let spatial = matches!(b.kind, BlockKind::Spatial { .. });
        slots.push(Slot {
            block: bi,
            at,
            spatial,
        });
        at += if spatial { 2 } else { 1 };
    }
    let eigenvalues: Vec<f64> = basis.eigenvalues.iter().copied().collect();
    let problem = Problem {
        y: &data.response,
        count_jacobian: weights
            .as_ref()
            .map_or(0.0, |w| -w.iter().map(|v| v.ln()).sum::<f64>()),
        log_offset,
        weights,
        design,
        xfull,
        engine,
        sum_eigen: eigenvalues.iter().sum(),
        eigenvalues,
        slots,
        n_var: at,
        alpha_bounds: opts.alpha_bounds,
        site_index: data.site_index.clone(),
    };

    let theta = optimize(&problem, &tspec, opts)?;
    let ev = problem
        .eval(&tspec, &theta)
        .ok_or_else(|| Error::NonFinite {
            context: "restricted likelihood".into(),
            params: theta.clone(),
        })?;
    assemble(
        problem, spec, basis, opts, svc_model, theta, ev, x_rows, group_idx, warnings,
    )
}

fn optimize(p: &Problem, tspec: &TransformSpec, opts: &FitOptions) -> Result<Vec<f64>> {
    let oo = OptimOptions {
        max_iter: opts.max_iter,
        rel_tol: opts.rel_tol,
        parallelism: opts.parallelism,
        ..Default::default()
    };
    let base = TransformSpec {
        tr_num: 0,
        ..*tspec
    };
    let mut starts = vec![[base.initial_params(false), p.initial_var(false)].concat()];
    if opts.multistart {
        starts.push([base.initial_params(true), p.initial_var(true)].concat());
    }
    let mut theta = fit_depth(p, &base, &starts, &oo, opts.snap_tol)?;
    for d in 1..=tspec.tr_num {
        let prev = TransformSpec {
            tr_num: d - 1,
            ..*tspec
        };
        let cur = TransformSpec {
            tr_num: d,
            ..*tspec
        };
        let nt = prev.n_params();
        let warm = [prev.grow_params(&theta[..nt]), theta[nt..].to_vec()].concat();
        let mut starts = vec![warm];
        if opts.multistart {
            let mut alt = starts[0].clone();
            let ntc = cur.n_params();
            alt[ntc - 2] = 0.1;
            alt[ntc - 1] = 0.1;
            starts.push(alt);
        }
        theta = fit_depth(p, &cur, &starts, &oo, opts.snap_tol)?;
    }
    Ok(theta)
}

fn fit_depth(
    p: &Problem,
    tspec: &TransformSpec,
    starts: &[Vec<f64>],
    oo: &OptimOptions,
    snap_tol: f64,
) -> Result<Vec<f64>> {
    let nt = tspec.n_params();
    let objective = |t: &[f64]| p.eval(tspec, t).map_or(f64::NAN, |e| -e.loglik);
    let mut best: Option<crate::optim::OptimResult> = None;
    for s in starts {
        let r = minimize(objective, s, oo);
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    let best = best.expect("at least one start");
    if !best.value.is_finite() || (!best.converged && best.iterations >= oo.max_iter) {
        return Err(Error::NonConvergence {
            iterations: best.iterations,
            grad_norm: best.grad_norm,
            best_value: -best.value,
            best_params: best.x,
        });
    }
    let mut theta = best.x;
    let mut value = best.value;

    // Zero-variance snapping, one process at a time.
    let mut fixed = vec![false; theta.len()];
    for slot in &p.slots {
        let i = nt + slot.at;
        if theta[i] == 0.0 {
            continue;
        }
        let mut cand = theta.clone();
        cand[i] = 0.0;
        let v = objective(&cand);
        if v.is_finite() && v <= value + snap_tol {
            theta = cand;
            value = value.min(v);
            fixed[i] = true;
            if slot.spatial {
                fixed[i + 1] = true;
            }
        }
    }
    if fixed.iter().any(|&f| f) {
        let free: Vec<usize> = (0..theta.len()).filter(|&i| !fixed[i]).collect();
        let base = theta.clone();
        let embed = |x: &[f64]| {
            let mut t = base.clone();
            for (k, &i) in free.iter().enumerate() {
                t[i] = x[k];
            }
            t
        };
        let sub = |x: &[f64]| objective(&embed(x));
        let x0: Vec<f64> = free.iter().map(|&i| theta[i]).collect();
        let r = minimize(sub, &x0, oo);
        if r.value < value {
            theta = embed(&r.x);
        }
    }
    for slot in &p.slots {
        let i = nt + slot.at;
        theta[i] = theta[i].abs();
        if slot.spatial {
            theta[i + 1] = theta[i + 1].clamp(p.alpha_bounds.0, p.alpha_bounds.1);
        }
    }
    Ok(theta)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    p: Problem,
    spec: &ModelSpec,
    basis: &EigenBasis,
    opts: &FitOptions,
    svc_model: bool,
    theta: Vec<f64>,
    ev: Eval,
    x_rows: Vec<Vec<f64>>,
    group_idx: Option<Vec<usize>>,
    warnings: Vec<String>,
) -> Result<FittedModel> {
    let tspec = spec.transform;
    let n = p.y.len();
    let nx = p.design.nx;
    let k = p.design.ncol;
    let nt = tspec.n_params();
    let var = &theta[nt..];
    let Eval {
        loglik,
        chain,
        z,
        sol,
    } = ev;

    let loglik = loglik - 0.5 * p.engine.log_det_shift;
    let coef_full = DVector::from_fn(k, |i, _| sol.scale[i] * sol.b[i]);
    let z_hat: Vec<f64> = (0..n)
        .map(|i| p.xfull.row(i).dot(&coef_full.transpose()))
        .collect();
    let w = p.weights.clone().unwrap_or_else(|| vec![1.0; n]);
    let sse: f64 = (0..n).map(|i| w[i] * (z[i] - z_hat[i]).powi(2)).sum();
    // Standard errors, random_SE and predictive noise all use the residual
    // variance, not the penalized REML scale `dd / (n - nx)`.
    let sigma2 = sse / (n - nx) as f64;
    let minv = sol.chol.inverse();
    let coef_cov = DMatrix::from_fn(k, k, |i, j| {
        sigma2 * sol.scale[i] * sol.scale[j] * minv[(i, j)]
    });

    let coefficients: Vec<Coefficient> = (0..nx)
        .map(|j| {
            let se = coef_cov[(j, j)].sqrt();
            let est = coef_full[j];
            Coefficient {
                name: p.design.fixed_names[j].clone(),
                estimate: est,
                se,
                z: est / se,
                p: two_sided_p(est / se),
            }
        })
        .collect();

    let xb: Vec<f64> = (0..n)
        .map(|i| (0..nx).map(|j| p.xfull[(i, j)] * coef_full[j]).sum())
        .collect();
    let sf_residual: Vec<f64> = match p
        .design
        .blocks
        .iter()
        .find(|b| b.kind == BlockKind::Spatial { coef: 0 })
    {
        Some(b) => (0..n)
            .map(|i| {
                (b.start..b.start + b.len)
                    .map(|j| p.xfull[(i, j)] * coef_full[j])
                    .sum()
            })
            .collect(),
        None => vec![0.0; n],
    };

    // Statistics.
    let wsum: f64 = w.iter().sum();
    let zbar: f64 = (0..n).map(|i| w[i] * z[i]).sum::<f64>() / wsum;
    let sst: f64 = (0..n).map(|i| w[i] * (z[i] - zbar).powi(2)).sum();

    let mut breakdown = vec![
        ("fixed coefficients".to_string(), nx),
        ("residual variance".to_string(), 1),
    ];
    let mut spatial = Vec::new();
    let mut nvc = Vec::new();
    let mut group_sigma = None;
    let sigma = sigma2.sqrt();
    let (mut n_sp, mut n_nvc, mut n_grp) = (0, 0, 0);
    for slot in &p.slots {
        let b = &p.design.blocks[slot.block];
        let s = var[slot.at].abs();
        let active = s > 0.0;
        match b.kind {
            BlockKind::Spatial { coef } => {
                let gamma: Vec<f64> = (b.start..b.start + b.len).map(|j| coef_full[j]).collect();
                spatial.push(ProcessVariance {
                    name: p.design.fixed_names[coef].clone(),
                    random_se: sigma * s,
                    alpha: active.then(|| var[slot.at + 1]),
                    moran_ratio: if active {
                        Some(basis.moran_ratio(&gamma)).filter(|v| v.is_finite())
                    } else {
                        None
                    },
                });
                n_sp += usize::from(active);
            }
            BlockKind::Nvc { coef } => {
                nvc.push((p.design.fixed_names[coef].clone(), sigma * s));
                n_nvc += usize::from(active);
            }
            BlockKind::Group => {
                group_sigma = Some(sigma * s);
                n_grp += usize::from(active);
            }
        }
    }
    if n_sp > 0 {
        breakdown.push(("spatial processes (sd, alpha)".to_string(), 2 * n_sp));
    }
    if n_nvc > 0 {
        breakdown.push(("non-spatial smooths".to_string(), n_nvc));
    }
    if n_grp > 0 {
        breakdown.push(("group variance".to_string(), n_grp));
    }
    if tspec.has_boxcox() {
        breakdown.push(("Box-Cox".to_string(), 1));
    }
    if tspec.tr_num > 0 {
        breakdown.push((
            "SAL layers".to_string(),
            tspec.n_params() - usize::from(tspec.has_boxcox()),
        ));
    }
    let criteria = InfoCriteria::new(loglik, breakdown, n);
    let adj_r2 = 1.0 - (sse / (n as f64 - criteria.p as f64 - 1.0)) / (sst / (n as f64 - 1.0));

    let xfixed = p.xfull.columns(0, nx).into_owned();
    let null = null_model(
        p.y,
        &xfixed,
        tspec
            .is_count()
            .then_some((tspec.delta, p.log_offset.as_deref())),
    )?;

    let lo = |i: usize| p.log_offset.as_ref().map_or(0.0, |o| o[i]);
    let (dispersion, deviance_explained) = if tspec.is_count() {
        let zc: Vec<f64> = (0..n)
            .map(|i| (p.y[i] + tspec.delta).ln() - lo(i))
            .collect();
        let disp: f64 = (0..n)
            .map(|i| w[i] * (zc[i] - chain.inverse_to_base(z_hat[i])).powi(2))
            .sum::<f64>()
            / (n - nx) as f64;
        let mu: Vec<f64> = (0..n)
            .map(|i| (chain.inverse_to_base(z_hat[i]) + lo(i)).exp())
            .collect();
        let off: Vec<f64> = (0..n).map(|i| lo(i).exp()).collect();
        let rate = p.y.iter().sum::<f64>() / off.iter().sum::<f64>();
        let mu0: Vec<f64> = off.iter().map(|o| o * rate).collect();
        let dev = poisson_deviance(p.y, &mu);
        let dev0 = poisson_deviance(p.y, &mu0);
        (Some(disp), Some(100.0 * (1.0 - dev / dev0)))
    } else {
        (None, None)
    };
    let fit_stats = FitStats {
        resid_se: sigma2.sqrt(),
        adj_r2_cond: adj_r2,
        dispersion,
        deviance_explained,
    };

    // Group effects.
    let group_effects = p
        .design
        .blocks
        .iter()
        .find(|b| b.kind == BlockKind::Group)
        .map(|b| {
            let levels = p
                .design
                .group_levels
                .as_ref()
                .expect("group block without levels");
            let mut out: Vec<GroupEffect> = (0..b.len)
                .map(|j| GroupEffect {
                    level: levels[j].clone(),
                    estimate: coef_full[b.start + j],
                    se: Some(coef_cov[(b.start + j, b.start + j)].sqrt()),
                })
                .collect();
            let last: f64 = -out.iter().map(|g| g.estimate).sum::<f64>();
            out.push(GroupEffect {
                level: levels[b.len].clone(),
                estimate: last,
                se: None,
            });
            out
        });

    // Varying coefficient fields.
    let site_index = p.site_index.clone();
    let svc = svc_model.then(|| {
        (0..=p.design.n_svc)
            .map(|coef| {
                let per: Vec<(f64, f64)> = map_indices(opts.parallelism, n, |i| {
                    let e = basis_row(basis, site_index.as_deref(), i);
                    let xk = if coef == 0 { 1.0 } else { x_rows[i][coef - 1] };
                    let a = DVector::from_vec(p.design.coef_loading(coef, xk, &e));
                    let est = a.dot(&coef_full);
                    let se = (a.transpose() * &coef_cov * &a)[(0, 0)].max(0.0).sqrt();
                    (est, se)
                });
                SvcCoefficient {
                    name: p.design.fixed_names[coef].clone(),
                    estimate: per.iter().map(|v| v.0).collect(),
                    se: per.iter().map(|v| v.1).collect(),
                    p: per.iter().map(|v| two_sided_p(v.0 / v.1)).collect(),
                }
            })
            .collect()
    });

    let training = Training {
        response: p.y.to_vec(),
        x: x_rows,
        group: group_idx,
        log_offset: p.log_offset.clone(),
        site_index,
        z,
    };
    let mut model = FittedModel {
        spec: spec.clone(),
        design: p.design,
        basis: basis.clone(),
        chain,
        transform_params: theta[..nt].to_vec(),
        variance_params: var.to_vec(),
        coefficients,
        svc,
        group_effects,
        variance: VarianceParams {
            sigma2,
            spatial,
            nvc,
            group_sigma,
        },
        criteria,
        fit_stats,
        null_model: null,
        coef_full,
        coef_cov,
        training,
        fitted: InSample {
            z_hat: Vec::new(),
            xb: Vec::new(),
            sf_residual: Vec::new(),
            se_z: Vec::new(),
            pred: Vec::new(),
            quantiles: QuantileTable::empty(&opts.quantile_probs),
        },
        warnings,
        is_svc_model: svc_model,
    };
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| p.xfull.row(i).iter().copied().collect())
        .collect();
    let los: Vec<f64> = (0..n).map(lo).collect();
    let pr = crate::predict::predict_rows(
        &model,
        &rows,
        &los,
        opts.include_noise_in_se,
        &opts.quantile_probs,
        opts.parallelism,
    );
    debug_assert!(pr
        .z_hat
        .iter()
        .zip(&z_hat)
        .all(|(a, b)| (a - b).abs() < 1e-8 * (1.0 + b.abs())));
    model.fitted = InSample {
        z_hat,
        xb,
        sf_residual,
        se_z: pr.se_z,
        pred: pr.pred,
        quantiles: pr.quantiles,
    };
    Ok(model)
}

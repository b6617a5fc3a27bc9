//! Prediction at new sites.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::basis::ExtendedBasis;
use crate::error::{Error, Result};
use crate::inference::{inverse_mean, predictive_quantiles, QuantileTable, QUANTILE_PROBS};
use crate::model::design::BlockKind;
use crate::model::FittedModel;
use crate::parallel::{map_indices, Parallelism};

/// Covariates (and optional group labels and offsets) at prediction sites.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewData {
    pub columns: Vec<(String, Vec<f64>)>,
    pub group: Option<Vec<String>>,
    pub offset: Option<Vec<f64>>,
    pub len: usize,
}

impl NewData {
    pub fn new(len: usize) -> Self {
        NewData {
            len,
            ..Default::default()
        }
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.columns.push((name.into(), values));
        self
    }

    pub fn with_group(mut self, group: Vec<String>) -> Self {
        self.group = Some(group);
        self
    }

    pub fn with_offset(mut self, offset: Vec<f64>) -> Self {
        self.offset = Some(offset);
        self
    }

    fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictOptions {
    pub compute_quantiles: bool,
    pub include_noise_in_se: bool,
    pub probs: Vec<f64>,
    pub parallelism: Parallelism,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions {
            compute_quantiles: true,
            include_noise_in_se: true,
            probs: QUANTILE_PROBS.to_vec(),
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    /// Point prediction on the response scale: the median for continuous
    /// responses, the mean for counts.
    pub pred: Vec<f64>,
    /// `phi^-1` of the working-scale prediction.
    pub median: Vec<f64>,
    pub pred_trans_g: Vec<f64>,
    pub pred_trans_g_se: Vec<f64>,
    pub xb: Vec<f64>,
    pub sf_residual: Vec<f64>,
    /// Varying-coefficient, smooth and group parts not in `xb` or `sf_residual`.
    pub other: Vec<f64>,
    pub quantiles: Option<QuantileTable>,
    pub len95: Option<Vec<f64>>,
    /// Rows whose NVC covariate lies outside the training range.
    pub extrapolated: Vec<bool>,
    pub warnings: Vec<String>,
}

pub(crate) struct RowPrediction {
    pub z_hat: Vec<f64>,
    pub se_z: Vec<f64>,
    pub pred: Vec<f64>,
    pub median: Vec<f64>,
    pub quantiles: QuantileTable,
}

/// Predictions from full design rows.
pub(crate) fn predict_rows(
    model: &FittedModel,
    rows: &[Vec<f64>],
    log_offset: &[f64],
    include_noise: bool,
    probs: &[f64],
    parallelism: Parallelism,
) -> RowPrediction {
    let per = map_indices(parallelism, rows.len(), |i| {
        let a = DVector::from_column_slice(&rows[i]);
        let z = a.dot(&model.coef_full);
        let mut var = (a.transpose() * &model.coef_cov * &a)[(0, 0)].max(0.0);
        if include_noise {
            var += model.sigma2() / model.noise_weight(z, log_offset[i]);
        }
        let se = var.sqrt();
        let (median, _) = model.chain.inverse(z, log_offset[i]);
        let pred = if model.is_count() {
            inverse_mean(&model.chain, z, se, log_offset[i])
        } else {
            median
        };
        let (q, clamped) = predictive_quantiles(z, se, &model.chain, log_offset[i], probs);
        (z, se, pred, median, q, clamped)
    });
    let mut out = RowPrediction {
        z_hat: Vec::with_capacity(rows.len()),
        se_z: Vec::with_capacity(rows.len()),
        pred: Vec::with_capacity(rows.len()),
        median: Vec::with_capacity(rows.len()),
        quantiles: QuantileTable::empty(probs),
    };
    for (z, se, pred, median, q, c) in per {
        out.z_hat.push(z);
        out.se_z.push(se);
        out.pred.push(pred);
        out.median.push(median);
        out.quantiles.rows.push(q);
        out.quantiles.clamped.push(c);
    }
    out
}

/// Predicts at new sites from covariates and the extended basis.
pub fn predict_oos(
    model: &FittedModel,
    x0: &NewData,
    basis0: &ExtendedBasis,
    compute_quantile: bool,
) -> Result<PredictionResult> {
    let opts = PredictOptions {
        compute_quantiles: compute_quantile,
        ..Default::default()
    };
    predict_oos_with(model, x0, basis0, &opts)
}

pub fn predict_oos_with(
    model: &FittedModel,
    x0: &NewData,
    basis0: &ExtendedBasis,
    opts: &PredictOptions,
) -> Result<PredictionResult> {
    let d = &model.design;
    let m = x0.len;
    if basis0.vectors0.ncols() != model.basis.n_vectors() {
        return Err(Error::invalid(format!(
            "extended basis has {} vectors, model has {}",
            basis0.vectors0.ncols(),
            model.basis.n_vectors()
        )));
    }
    if basis0.vectors0.nrows() != m {
        return Err(Error::invalid(format!(
            "extended basis has {} rows for {m} prediction rows",
            basis0.vectors0.nrows()
        )));
    }
    let mut cols = Vec::new();
    for name in &d.fixed_names[1..] {
        let c = x0
            .column(name)
            .ok_or_else(|| Error::invalid(format!("prediction data lacks covariate '{name}'")))?;
        if c.len() != m {
            return Err(Error::invalid(format!(
                "column '{name}' has {} rows, expected {m}",
                c.len()
            )));
        }
        cols.push(c);
    }
    let mut warnings = Vec::new();
    let groups: Vec<Option<usize>> = match (&x0.group, &d.group_levels) {
        (Some(g), Some(_)) => {
            let idx: Vec<Option<usize>> = g.iter().map(|l| d.group_index(l)).collect();
            let unknown = idx.iter().filter(|v| v.is_none()).count();
            if unknown > 0 {
                warnings.push(format!(
                    "{unknown} row(s) with unknown group level use a zero group effect"
                ));
            }
            idx
        }
        _ => vec![None; m],
    };
    let log_offset: Vec<f64> = match (&x0.offset, model.is_count()) {
        (Some(o), true) => {
            if let Some(i) = o.iter().position(|v| !(*v > 0.0)) {
                return Err(Error::invalid(format!("offset must be positive, row {i}")));
            }
            o.iter().map(|v| v.ln()).collect()
        }
        _ => vec![0.0; m],
    };
    let x_rows: Vec<Vec<f64>> = (0..m)
        .map(|i| cols.iter().map(|c| c[i]).collect())
        .collect();
    let rows: Vec<Vec<f64>> = map_indices(opts.parallelism, m, |i| {
        let e: Vec<f64> = basis0.vectors0.row(i).iter().copied().collect();
        d.row(&x_rows[i], &e, groups[i])
    });
    let extrapolated: Vec<bool> = x_rows
        .iter()
        .map(|r| {
            d.nvc
                .iter()
                .enumerate()
                .any(|(k, nb)| nb.as_ref().is_some_and(|b| b.extrapolates(r[k])))
        })
        .collect();
    if extrapolated.iter().any(|&e| e) {
        warnings.push(
            "some covariates lie outside the training range; smooth terms extrapolate linearly"
                .into(),
        );
    }

    let rp = predict_rows(
        model,
        &rows,
        &log_offset,
        opts.include_noise_in_se,
        &opts.probs,
        opts.parallelism,
    );
    let coef = &model.coef_full;
    let xb: Vec<f64> = rows
        .iter()
        .map(|r| (0..d.nx).map(|j| r[j] * coef[j]).sum())
        .collect();
    let sf_residual: Vec<f64> = match d
        .blocks
        .iter()
        .find(|b| b.kind == BlockKind::Spatial { coef: 0 })
    {
        Some(b) => rows
            .iter()
            .map(|r| (b.start..b.start + b.len).map(|j| r[j] * coef[j]).sum())
            .collect(),
        None => vec![0.0; m],
    };
    let other: Vec<f64> = (0..m)
        .map(|i| rp.z_hat[i] - xb[i] - sf_residual[i])
        .collect();
    let (quantiles, len95) = if opts.compute_quantiles {
        let len95 = match (rp.quantiles.column(0.025), rp.quantiles.column(0.975)) {
            (Some(lo), Some(hi)) => Some(hi.iter().zip(&lo).map(|(h, l)| h - l).collect()),
            _ => None,
        };
        (Some(rp.quantiles), len95)
    } else {
        (None, None)
    };
    Ok(PredictionResult {
        pred: rp.pred,
        median: rp.median,
        pred_trans_g: rp.z_hat,
        pred_trans_g_se: rp.se_z,
        xb,
        sf_residual,
        other,
        quantiles,
        len95,
        extrapolated,
        warnings,
    })
}

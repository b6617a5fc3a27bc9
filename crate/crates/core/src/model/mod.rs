//! Spatial regression with random Moran eigenvector coefficients, fitted
//! jointly with the response transformation by restricted likelihood.
//!
//! On the working scale `z = phi(y)`:
//!
//! `z_i = sum_k x_ik beta_ik + g_i + e_i`, with
//! `beta_ik = b_k + e_i' gamma_k + N_k(x_ik)' delta_k`,
//!
//! where `gamma_k ~ N(0, sigma^2 s_k^2 diag(lambda^alpha_k) sum(lambda) / sum(lambda^alpha_k))`
//! is a spatial process on the eigenvector basis (the intercept process is
//! the residual spatial dependence), `delta_k ~ N(0, sigma^2 t_k^2 I)` a
//! non-spatial smooth in the covariate itself, and `g` a group effect with
//! sum-to-zero coding. Count responses use observation weights `y + delta`.

pub mod criteria;
pub mod design;
mod fit;
mod reml;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::EigenBasis;
use crate::error::{Error, Result};
use crate::inference::QuantileTable;
use crate::parallel::Parallelism;
use crate::transform::{TransformChain, TransformSpec};

pub use criteria::{FitStats, InfoCriteria, NullModel};
pub use design::{Design, INTERCEPT};

/// Observations for one fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelData {
    pub response: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
    pub group: Option<Vec<String>>,
    pub offset: Option<Vec<f64>>,
    /// Basis row of each observation; identity when `None`.
    pub site_index: Option<Vec<usize>>,
}

impl ModelData {
    pub fn new(response: Vec<f64>) -> Self {
        ModelData {
            response,
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

    pub fn with_site_index(mut self, index: Vec<usize>) -> Self {
        self.site_index = Some(index);
        self
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Covariates with spatially varying coefficients.
    pub svc_columns: Vec<String>,
    /// Covariates with constant coefficients.
    pub const_columns: Vec<String>,
    /// Adds a non-spatially varying smooth to every SVC covariate.
    pub nvc_enabled: bool,
    pub transform: TransformSpec,
}

impl ModelSpec {
    pub fn new(transform: TransformSpec) -> Self {
        ModelSpec {
            transform,
            ..Default::default()
        }
    }

    pub fn with_svc(mut self, cols: &[&str]) -> Self {
        self.svc_columns = cols.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_const(mut self, cols: &[&str]) -> Self {
        self.const_columns = cols.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_nvc(mut self, on: bool) -> Self {
        self.nvc_enabled = on;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub parallelism: Parallelism,
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Also start from a perturbed parameter vector and keep the better fit.
    pub multistart: bool,
    /// A variance is set to zero when that lowers the log-likelihood by
    /// less than this.
    pub snap_tol: f64,
    /// Add the residual variance to predictive standard errors.
    pub include_noise_in_se: bool,
    pub quantile_probs: Vec<f64>,
    pub alpha_bounds: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            parallelism: Parallelism::default(),
            max_iter: 500,
            rel_tol: 1e-8,
            multistart: true,
            snap_tol: 1e-5,
            include_noise_in_se: true,
            quantile_probs: crate::inference::QUANTILE_PROBS.to_vec(),
            alpha_bounds: (-4.0, 12.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
}

/// Per-observation values of one varying coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcCoefficient {
    pub name: String,
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEffect {
    pub level: String,
    pub estimate: f64,
    /// `None` for the level implied by the sum-to-zero constraint.
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessVariance {
    pub name: String,
    /// Standard deviation of the process coefficients.
    pub random_se: f64,
    /// `None` for an inactive process.
    pub alpha: Option<f64>,
    pub moran_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceParams {
    pub sigma2: f64,
    pub spatial: Vec<ProcessVariance>,
    /// Non-spatial smooth terms: (covariate, random_SE).
    pub nvc: Vec<(String, f64)>,
    pub group_sigma: Option<f64>,
}

/// In-sample predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InSample {
    pub z_hat: Vec<f64>,
    pub xb: Vec<f64>,
    pub sf_residual: Vec<f64>,
    pub se_z: Vec<f64>,
    pub pred: Vec<f64>,
    pub quantiles: QuantileTable,
}

/// Training inputs retained for post-fit analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Training {
    pub response: Vec<f64>,
    /// Fixed covariates without the intercept, one row per observation.
    pub x: Vec<Vec<f64>>,
    pub group: Option<Vec<usize>>,
    pub log_offset: Option<Vec<f64>>,
    pub site_index: Option<Vec<usize>>,
    /// Transformed response.
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub design: Design,
    pub basis: EigenBasis,
    pub chain: TransformChain,
    pub transform_params: Vec<f64>,
    /// Raw variance parameters as optimized.
    pub variance_params: Vec<f64>,
    pub coefficients: Vec<Coefficient>,
    pub svc: Option<Vec<SvcCoefficient>>,
    pub group_effects: Option<Vec<GroupEffect>>,
    pub variance: VarianceParams,
    pub criteria: InfoCriteria,
    pub fit_stats: FitStats,
    pub null_model: NullModel,
    /// All coefficients (fixed then random) in design-column order.
    pub coef_full: DVector<f64>,
    /// Conditional covariance of `coef_full`.
    pub coef_cov: DMatrix<f64>,
    pub training: Training,
    pub fitted: InSample,
    pub warnings: Vec<String>,
    pub is_svc_model: bool,
}

impl FittedModel {
    pub fn n(&self) -> usize {
        self.training.response.len()
    }

    pub fn sigma2(&self) -> f64 {
        self.variance.sigma2
    }

    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn svc_coefficient(&self, name: &str) -> Option<&SvcCoefficient> {
        self.svc.as_ref()?.iter().find(|c| c.name == name)
    }

    pub fn is_count(&self) -> bool {
        self.spec.transform.is_count()
    }

    /// Working-scale noise weight of a prediction: 1 for continuous
    /// responses, the predicted count scale for counts.
    pub(crate) fn noise_weight(&self, z_hat: f64, log_offset: f64) -> f64 {
        if self.is_count() {
            (self.chain.inverse_to_base(z_hat) + log_offset).exp()
        } else {
            1.0
        }
    }
}

/// Fits a model whose coefficients are constant apart from the intercept's
/// residual spatial process.
pub fn fit_resf(
    data: &ModelData,
    spec: &ModelSpec,
    basis: &EigenBasis,
    opts: &FitOptions,
) -> Result<FittedModel> {
    if !spec.svc_columns.is_empty() || spec.nvc_enabled {
        return Err(Error::invalid(
            "fit_resf takes constant coefficients only; use fit_resf_vc for varying ones",
        ));
    }
    fit::fit_model(data, spec, basis, opts, false)
}

/// Fits a model with spatially (and optionally non-spatially) varying
/// coefficients on `spec.svc_columns`.
pub fn fit_resf_vc(
    data: &ModelData,
    spec: &ModelSpec,
    basis: &EigenBasis,
    opts: &FitOptions,
) -> Result<FittedModel> {
    fit::fit_model(data, spec, basis, opts, true)
}

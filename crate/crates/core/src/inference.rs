//! Post-fit analysis: quantiles, marginal effects, the implied response
//! distribution and significance summaries.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::sym_eigen_desc;
use crate::model::FittedModel;
use crate::parallel::{map_indices, Parallelism};
use crate::stats::{mean, skew_kurtosis, std_normal_pdf, std_normal_quantile, Summary};
use crate::transform::TransformChain;

/// Probability grid of quantile tables.
pub const QUANTILE_PROBS: [f64; 15] = [
    0.01, 0.025, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.975, 0.99,
];

pub const DEFAULT_MC_DRAWS: usize = 1_000_000;
const MC_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub probs: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    /// Rows where some quantile hit a back-transformation boundary.
    pub clamped: Vec<bool>,
}

impl QuantileTable {
    pub fn empty(probs: &[f64]) -> Self {
        QuantileTable {
            probs: probs.to_vec(),
            rows: Vec::new(),
            clamped: Vec::new(),
        }
    }

    /// Column headers `q0.01 .. q0.99`.
    pub fn headers(&self) -> Vec<String> {
        self.probs.iter().map(|p| format!("q{p}")).collect()
    }

    pub fn column(&self, prob: f64) -> Option<Vec<f64>> {
        let j = self.probs.iter().position(|&p| (p - prob).abs() < 1e-12)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// `q_p = phi^-1(z + Phi^-1(p) se)` for each probability, plus a clamp flag.
pub fn predictive_quantiles(
    point_z: f64,
    se_z: f64,
    chain: &TransformChain,
    log_offset: f64,
    probs: &[f64],
) -> (Vec<f64>, bool) {
    let mut clamped = false;
    let q = probs
        .iter()
        .map(|&p| {
            let (y, c) = chain.inverse(point_z + std_normal_quantile(p) * se_z, log_offset);
            clamped |= c;
            y
        })
        .collect();
    (q, clamped)
}

fn hermite_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        // Golub-Welsch for the standard normal weight.
        let m = 48;
        let j = DMatrix::from_fn(m, m, |a, b| {
            if a + 1 == b || b + 1 == a {
                (a.max(b) as f64).sqrt()
            } else {
                0.0
            }
        });
        let (nodes, vecs) = sym_eigen_desc(j);
        let weights: Vec<f64> = (0..m).map(|i| vecs[(0, i)] * vecs[(0, i)]).collect();
        (nodes.iter().copied().collect(), weights)
    })
}

/// `E[phi^-1(Z)]` for `Z ~ N(z, se^2)` by Gauss-Hermite quadrature.
pub fn inverse_mean(chain: &TransformChain, z: f64, se: f64, log_offset: f64) -> f64 {
    if se == 0.0 {
        return chain.inverse(z, log_offset).0;
    }
    let (nodes, weights) = hermite_rule();
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * chain.inverse(z + se * x, log_offset).0)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalEffects {
    /// Covariate names; the intercept has no marginal effect.
    pub names: Vec<String>,
    /// `values[i][k]` is `dy_i / dx_ik`.
    pub values: Vec<Vec<f64>>,
    pub summaries: Vec<Summary>,
    /// Summary statistic to report.
    pub recommended: String,
}

/// `dy_i/dx_ik = d(x_ik beta_ik)/dx_ik * d phi^-1 / dz` at the fitted
/// working value. For varying coefficients with a non-spatial smooth the
/// first factor includes the smooth's slope.
pub fn marginal_effects(model: &FittedModel) -> MarginalEffects {
    let d = &model.design;
    let n = model.n();
    let names: Vec<String> = d.fixed_names[1..].to_vec();
    let values: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let lo = model.training.log_offset.as_ref().map_or(0.0, |o| o[i]);
            let dinv = model.chain.inverse_deriv(model.fitted.z_hat[i], lo);
            let e: Vec<f64> = crate::model::design::basis_row(
                &model.basis,
                model.training.site_index.as_deref(),
                i,
            );
            (1..d.nx)
                .map(|coef| {
                    let xk = model.training.x[i][coef - 1];
                    coefficient_slope(model, coef, xk, &e) * dinv
                })
                .collect()
        })
        .collect();
    let summaries = (0..names.len())
        .map(|k| Summary::of(&values.iter().map(|r| r[k]).collect::<Vec<f64>>()))
        .collect();
    MarginalEffects {
        names,
        values,
        summaries,
        recommended: "median".into(),
    }
}

/// `d(x beta(x))/dx` on the working scale for fixed column `coef`.
pub(crate) fn coefficient_slope(model: &FittedModel, coef: usize, xk: f64, e: &[f64]) -> f64 {
    let d = &model.design;
    if coef > d.n_svc {
        return model.coef_full[coef];
    }
    let a = DVector::from_vec(d.coef_loading(coef, xk, e));
    let mut slope = a.dot(&model.coef_full);
    if let Some(s) = d.nvc_slope_loading(coef, xk) {
        slope += DVector::from_vec(s).dot(&model.coef_full);
    }
    slope
}

/// Pooled working-scale reference distribution `N(mean, sd^2)`: the mean
/// fitted value, and the residual variance plus the sample variance of the
/// fitted random part.
pub fn reference_distribution(model: &FittedModel) -> (f64, f64, f64) {
    let f = &model.fitted;
    let n = model.n();
    let re: Vec<f64> = (0..n).map(|i| f.z_hat[i] - f.xb[i]).collect();
    let var_re = if n > 1 {
        crate::stats::sd(&re).powi(2)
    } else {
        0.0
    };
    let lo: Vec<f64> = (0..n)
        .map(|i| model.training.log_offset.as_ref().map_or(0.0, |o| o[i]))
        .collect();
    let noise = mean(
        &(0..n)
            .map(|i| model.sigma2() / model.noise_weight(f.z_hat[i], lo[i]))
            .collect::<Vec<f64>>(),
    );
    (mean(&f.z_hat), (noise + var_re).sqrt(), mean(&lo))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub y: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityCurve {
    pub fn trapezoid_integral(&self) -> f64 {
        self.y
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(y, d)| 0.5 * (y[1] - y[0]) * (d[0] + d[1]))
            .sum()
    }
}

/// Density of `y = phi^-1(z)`, `z ~ N(mean, sd^2)` from
/// [`reference_distribution`], on a grid covering the observed response
/// range and the central 99.98% of the implied distribution.
pub fn estimated_density(model: &FittedModel, grid_size: usize) -> DensityCurve {
    let (mu, sd, lo) = reference_distribution(model);
    density_curve(
        &model.chain,
        mu,
        sd,
        lo,
        &model.training.response,
        grid_size,
    )
}

pub fn density_curve(
    chain: &TransformChain,
    mu: f64,
    sd: f64,
    log_offset: f64,
    observed: &[f64],
    grid_size: usize,
) -> DensityCurve {
    let grid_size = grid_size.max(2);
    let omin = observed.iter().copied().fold(f64::INFINITY, f64::min);
    let omax = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k = std_normal_quantile(0.9999);
    let (lo_q, c1) = chain.inverse(mu - k * sd, log_offset);
    let (hi_q, c2) = chain.inverse(mu + k * sd, log_offset);
    let mut a = omin.min(lo_q);
    let mut b = omax.max(if c2 { omax } else { hi_q });
    if c1 {
        a = omin.min(a.max(0.0));
    }
    if chain.forward(a, log_offset).is_err() {
        a = (a.max(0.0) + 1e-9 * (b - a).abs()).max(f64::MIN_POSITIVE);
    }
    if !(b > a) {
        b = a + 1.0;
    }
    let y: Vec<f64> = (0..grid_size)
        .map(|i| a + (b - a) * i as f64 / (grid_size - 1) as f64)
        .collect();
    let density = y
        .iter()
        .map(|&v| match chain.forward(v, log_offset) {
            Ok((z, lj)) => {
                let d = std_normal_pdf((z - mu) / sd) / sd * lj.exp();
                if d.is_finite() {
                    d
                } else {
                    0.0
                }
            }
            Err(_) => 0.0,
        })
        .collect();
    DensityCurve { y, density }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Skewness and excess kurtosis of the implied response distribution by
/// Monte Carlo. Draws come in fixed-size chunks, each with its own
/// generator stream, so the result does not depend on scheduling.
pub fn distribution_moments(
    model: &FittedModel,
    seed: u64,
    draws: usize,
    parallelism: Parallelism,
) -> Moments {
    let (mu, sd, lo) = reference_distribution(model);
    moments_of(&model.chain, mu, sd, lo, seed, draws, parallelism)
}

pub fn moments_of(
    chain: &TransformChain,
    mu: f64,
    sd: f64,
    log_offset: f64,
    seed: u64,
    draws: usize,
    parallelism: Parallelism,
) -> Moments {
    let chunks = draws.div_ceil(MC_CHUNK);
    let parts = map_indices(parallelism, chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let len = MC_CHUNK.min(draws - c * MC_CHUNK);
        (0..len)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                chain.inverse(mu + sd * g, log_offset).0
            })
            .collect::<Vec<f64>>()
    });
    let all: Vec<f64> = parts.into_iter().flatten().collect();
    let (skewness, excess_kurtosis) = skew_kurtosis(&all);
    Moments {
        skewness,
        excess_kurtosis,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceCounts {
    pub name: String,
    pub not_significant: usize,
    pub level10: usize,
    pub level5: usize,
    pub level1: usize,
}

/// Buckets p-values into not significant / 10% / 5% / 1%, finest level wins.
pub fn significance_counts(name: &str, p: &[f64]) -> SignificanceCounts {
    let mut s = SignificanceCounts {
        name: name.to_string(),
        not_significant: 0,
        level10: 0,
        level5: 0,
        level1: 0,
    };
    for &v in p {
        if v < 0.01 {
            s.level1 += 1;
        } else if v < 0.05 {
            s.level5 += 1;
        } else if v < 0.10 {
            s.level10 += 1;
        } else {
            s.not_significant += 1;
        }
    }
    s
}

pub fn significance_summary(model: &FittedModel) -> Vec<SignificanceCounts> {
    model
        .svc
        .as_ref()
        .map(|svc| {
            svc.iter()
                .map(|c| significance_counts(&c.name, &c.p))
                .collect()
        })
        .unwrap_or_default()
}

//! Invertible response transformations.
//!
//! A [`TransformChain`] maps the response `y` to a working variable `z`
//! that is modelled as Gaussian. Chains are assembled from a
//! [`TransformSpec`] and a flat parameter vector; standardization constants
//! are computed from the training response while the chain is built.
//!
//! Layer order by regime (`D` = number of SAL layers):
//!
//! | regime | spec | layers |
//! |---|---|---|
//! | Gaussian | continuous, D = 0 | none |
//! | (a) | continuous, non-negative, D = 0 | Box-Cox |
//! | (b) | continuous, D >= 1 | std, SAL x D, std |
//! | (c) | continuous, non-negative, D >= 1 | Box-Cox, std, SAL x D, std |
//! | (d) | count, D = 0 | CountLog |
//! | (e) | count, D >= 1 | CountLog, std, SAL x D, std |
//!
//! The innermost SAL layers carry all four parameters. The outermost one is
//! followed by a standardization, which absorbs its location and scale, so
//! only `theta3` and `theta4` are free there.

mod boxcox;
mod count;
mod fit;
mod sal;

pub use boxcox::{boxcox_forward, boxcox_inverse, boxcox_inverse_deriv, boxcox_log_deriv};
pub use count::{count_forward, count_inverse, DEFAULT_DELTA};
pub use fit::{fit_chain, fit_chain_path, ChainFit};
pub use sal::{sal_deriv, sal_forward, sal_inverse, sal_inverse_deriv, sal_log_deriv, SalParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YType {
    #[default]
    Continuous,
    Count,
}

impl std::str::FromStr for YType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(YType::Continuous),
            "count" => Ok(YType::Count),
            _ => Err(Error::invalid(format!("unknown y_type '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Gaussian,
    /// (a) Box-Cox.
    BoxCox,
    /// (b) SAL layers only.
    Sal,
    /// (c) Box-Cox followed by SAL layers.
    BoxCoxSal,
    /// (d) log-Gaussian count approximation.
    Count,
    /// (e) count layer followed by SAL layers.
    CountSal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub y_type: YType,
    pub y_nonneg: bool,
    pub tr_num: usize,
    /// Start value of the count layer.
    pub delta: f64,
}

impl Default for TransformSpec {
    fn default() -> Self {
        TransformSpec::gaussian()
    }
}

impl TransformSpec {
    pub fn new(y_type: YType, y_nonneg: bool, tr_num: usize) -> Self {
        TransformSpec {
            y_type,
            y_nonneg: y_nonneg || y_type == YType::Count,
            tr_num,
            delta: DEFAULT_DELTA,
        }
    }

    pub fn gaussian() -> Self {
        TransformSpec::new(YType::Continuous, false, 0)
    }

    pub fn regime(&self) -> Regime {
        match (self.y_type, self.y_nonneg, self.tr_num) {
            (YType::Count, _, 0) => Regime::Count,
            (YType::Count, _, _) => Regime::CountSal,
            (YType::Continuous, false, 0) => Regime::Gaussian,
            (YType::Continuous, true, 0) => Regime::BoxCox,
            (YType::Continuous, false, _) => Regime::Sal,
            (YType::Continuous, true, _) => Regime::BoxCoxSal,
        }
    }

    pub fn has_boxcox(&self) -> bool {
        matches!(self.regime(), Regime::BoxCox | Regime::BoxCoxSal)
    }

    pub fn is_count(&self) -> bool {
        self.y_type == YType::Count
    }

    /// Number of free parameters, which is also their contribution to the
    /// information-criterion parameter count.
    pub fn n_params(&self) -> usize {
        usize::from(self.has_boxcox()) + sal_param_count(self.tr_num)
    }

    /// Human-readable names of the free parameters, in vector order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.has_boxcox() {
            names.push("boxcox_lambda".to_string());
        }
        for d in 1..=self.tr_num {
            if d < self.tr_num {
                names.push(format!("sal{d}_theta1"));
                names.push(format!("sal{d}_log_theta2"));
            }
            names.push(format!("sal{d}_log_theta3"));
            names.push(format!("sal{d}_theta4"));
        }
        names
    }

    /// Start values: the identity warp, or a mildly perturbed variant.
    pub fn initial_params(&self, perturbed: bool) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        if self.has_boxcox() {
            p.push(if perturbed { 0.25 } else { 1.0 });
        }
        for d in 1..=self.tr_num {
            if d < self.tr_num {
                p.extend([0.0, 0.0]);
            }
            if perturbed {
                p.extend([0.1, 0.1]);
            } else {
                p.extend([0.0, 0.0]);
            }
        }
        p
    }

    /// Parameters of a `tr_num + 1` chain that reproduce the chain given by
    /// `params` under this spec: the former outermost SAL layer becomes an
    /// inner layer with unit location and scale, and the new outermost
    /// layer is the identity.
    pub fn grow_params(&self, params: &[f64]) -> Vec<f64> {
        let mut out = params.to_vec();
        if self.tr_num >= 1 {
            let at = out.len() - 2;
            out.splice(at..at, [0.0, 0.0]);
        }
        out.extend([0.0, 0.0]);
        out
    }

    /// Validates the response against the regime's domain.
    pub fn check_response(&self, y: &[f64]) -> Result<()> {
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::domain(format!("non-finite response at row {i}")));
            }
            if self.is_count() && (v < 0.0 || v.fract() != 0.0) {
                return Err(Error::domain(format!(
                    "count response must be a non-negative integer, row {i} has {v}"
                )));
            }
            if self.has_boxcox() && v <= 0.0 {
                return Err(Error::domain(format!(
                    "Box-Cox regimes need a positive response, row {i} has {v}"
                )));
            }
        }
        Ok(())
    }

    /// Builds the chain for `params` from training data, returning the chain,
    /// the transformed response and the summed log-Jacobian over all rows.
    pub fn build(
        &self,
        params: &[f64],
        y: &[f64],
        log_offset: Option<&[f64]>,
    ) -> Result<(TransformChain, Vec<f64>, f64)> {
        if params.len() != self.n_params() {
            return Err(Error::invalid(format!(
                "expected {} transformation parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        let mut layers = Vec::new();
        let mut z = y.to_vec();
        let mut log_jac = 0.0;
        let mut it = params.iter().copied();

        if self.is_count() {
            let layer = Layer::CountLog { delta: self.delta };
            for (i, v) in z.iter_mut().enumerate() {
                let lo = log_offset.map_or(0.0, |o| o[i]);
                let (zz, lj) = layer.forward(*v, lo)?;
                *v = zz;
                log_jac += lj;
            }
            layers.push(layer);
        } else if self.has_boxcox() {
            let lambda = it.next().unwrap_or(1.0);
            if !lambda.is_finite() || lambda.abs() > 5.0 {
                return Err(Error::domain(format!(
                    "Box-Cox parameter {lambda} out of range"
                )));
            }
            let layer = Layer::BoxCox { lambda };
            apply(&layer, &mut z, &mut log_jac)?;
            layers.push(layer);
        }

        if self.tr_num > 0 {
            let std = Layer::standardize(&z)?;
            apply(&std, &mut z, &mut log_jac)?;
            layers.push(std);
            for d in 1..=self.tr_num {
                let p = if d < self.tr_num {
                    let t1 = it.next().unwrap_or(0.0);
                    let lt2 = it.next().unwrap_or(0.0);
                    let lt3 = it.next().unwrap_or(0.0);
                    let t4 = it.next().unwrap_or(0.0);
                    sal_from(t1, lt2, lt3, t4)?
                } else {
                    let lt3 = it.next().unwrap_or(0.0);
                    let t4 = it.next().unwrap_or(0.0);
                    sal_from(0.0, 0.0, lt3, t4)?
                };
                let layer = Layer::Sal(p);
                apply(&layer, &mut z, &mut log_jac)?;
                layers.push(layer);
            }
            let std = Layer::standardize(&z)?;
            apply(&std, &mut z, &mut log_jac)?;
            layers.push(std);
        }
        if !log_jac.is_finite() {
            return Err(Error::NonFinite {
                context: "transformation log-Jacobian".into(),
                params: params.to_vec(),
            });
        }
        Ok((
            TransformChain {
                spec: *self,
                layers,
            },
            z,
            log_jac,
        ))
    }
}

fn sal_param_count(d: usize) -> usize {
    if d == 0 {
        0
    } else {
        4 * (d - 1) + 2
    }
}

fn sal_from(t1: f64, lt2: f64, lt3: f64, t4: f64) -> Result<SalParams> {
    if lt2.abs() > 12.0 || lt3.abs() > 12.0 || t4.abs() > 1e3 || t1.abs() > 1e3 {
        return Err(Error::domain("SAL parameters out of range"));
    }
    SalParams::new(t1, lt2.exp(), lt3.exp(), t4)
}

fn apply(layer: &Layer, z: &mut [f64], log_jac: &mut f64) -> Result<()> {
    if let Layer::Sal(p) = layer {
        let ls = p.theta2.ln() + p.theta3.ln();
        for v in z.iter_mut() {
            let (zz, lj) = sal::sal_forward_log_deriv(*v, p, ls);
            *v = zz;
            *log_jac += lj;
        }
        return Ok(());
    }
    if let Layer::Standardize { mean, sd } = *layer {
        z.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        *log_jac -= z.len() as f64 * sd.ln();
        return Ok(());
    }
    for v in z.iter_mut() {
        let (zz, lj) = layer.forward(*v, 0.0)?;
        *v = zz;
        *log_jac += lj;
    }
    Ok(())
}

/// One fitted layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum Layer {
    BoxCox { lambda: f64 },
    CountLog { delta: f64 },
    Sal(SalParams),
    Standardize { mean: f64, sd: f64 },
}

impl Layer {
    fn standardize(z: &[f64]) -> Result<Layer> {
        let mean = crate::stats::mean(z);
        let sd = crate::stats::sd(z);
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::domain(
                "transformed response has zero or undefined spread",
            ));
        }
        Ok(Layer::Standardize { mean, sd })
    }

    /// Forward value and `log dz/dy`. `log_offset` only affects the count layer.
    pub fn forward(&self, y: f64, log_offset: f64) -> Result<(f64, f64)> {
        match *self {
            Layer::BoxCox { lambda } => {
                boxcox::check_domain(y, lambda)?;
                Ok((
                    boxcox::forward_unchecked(y, lambda),
                    boxcox_log_deriv(y, lambda),
                ))
            }
            Layer::CountLog { delta } => {
                if !(y >= 0.0) {
                    return Err(Error::domain(format!(
                        "count response must be >= 0, got {y}"
                    )));
                }
                let s = y + delta;
                Ok((s.ln() - log_offset, -s.ln()))
            }
            Layer::Sal(p) => Ok((sal_forward(y, &p), sal_log_deriv(y, &p))),
            Layer::Standardize { mean, sd } => Ok(((y - mean) / sd, -sd.ln())),
        }
    }

    /// Inverse value, `dy/dz` at that point, and whether a boundary clamp hit.
    pub fn inverse(&self, z: f64, log_offset: f64) -> (f64, f64, bool) {
        match *self {
            Layer::BoxCox { lambda } => {
                let (y, c) = boxcox_inverse(z, lambda);
                (y, boxcox_inverse_deriv(z, lambda), c)
            }
            Layer::CountLog { delta } => {
                let e = (z + log_offset).exp();
                let (y, c) = count_inverse(z + log_offset, delta);
                (y, if c { 0.0 } else { e }, c)
            }
            Layer::Sal(p) => {
                let y = sal_inverse(z, &p);
                (y, 1.0 / sal_deriv(y, &p), false)
            }
            Layer::Standardize { mean, sd } => (mean + sd * z, sd, false),
        }
    }
}

/// A fitted, invertible transformation chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformChain {
    pub spec: TransformSpec,
    pub layers: Vec<Layer>,
}

impl TransformChain {
    pub fn identity() -> Self {
        TransformChain {
            spec: TransformSpec::gaussian(),
            layers: Vec::new(),
        }
    }

    /// A chain from explicit layers, e.g. for diagnostics.
    pub fn from_layers(spec: TransformSpec, layers: Vec<Layer>) -> Self {
        TransformChain { spec, layers }
    }

    pub fn is_identity(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn boxcox_lambda(&self) -> Option<f64> {
        self.layers.iter().find_map(|l| match l {
            Layer::BoxCox { lambda } => Some(*lambda),
            _ => None,
        })
    }

    pub fn sal_layers(&self) -> Vec<SalParams> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Sal(p) => Some(*p),
                _ => None,
            })
            .collect()
    }

    /// `z = phi(y)` and the summed `log dphi/dy` over all layers.
    pub fn forward(&self, y: f64, log_offset: f64) -> Result<(f64, f64)> {
        let mut v = y;
        let mut lj = 0.0;
        for layer in &self.layers {
            let (z, l) = layer.forward(v, log_offset)?;
            v = z;
            lj += l;
        }
        Ok((v, lj))
    }

    /// `y = phi^-1(z)` and whether a boundary clamp was applied.
    pub fn inverse(&self, z: f64, log_offset: f64) -> (f64, bool) {
        let (y, _, c) = self.inverse_with_deriv(z, log_offset);
        (y, c)
    }

    /// `dy/dz` of the inverse chain at `z`.
    pub fn inverse_deriv(&self, z: f64, log_offset: f64) -> f64 {
        self.inverse_with_deriv(z, log_offset).1
    }

    pub fn inverse_with_deriv(&self, z: f64, log_offset: f64) -> (f64, f64, bool) {
        let mut v = z;
        let mut d = 1.0;
        let mut clamped = false;
        for layer in self.layers.iter().rev() {
            let (y, dl, c) = layer.inverse(v, log_offset);
            v = y;
            d *= dl;
            clamped |= c;
        }
        (v, d, clamped)
    }

    /// Undoes every layer except a leading Box-Cox or count layer, giving
    /// the value on that layer's output scale.
    pub fn inverse_to_base(&self, z: f64) -> f64 {
        let skip = usize::from(matches!(
            self.layers.first(),
            Some(Layer::BoxCox { .. } | Layer::CountLog { .. })
        ));
        let mut v = z;
        for layer in self.layers[skip..].iter().rev() {
            v = layer.inverse(v, 0.0).0;
        }
        v
    }

    /// Derivative `d base / dz` of [`Self::inverse_to_base`].
    pub fn inverse_to_base_deriv(&self, z: f64) -> f64 {
        let skip = usize::from(matches!(
            self.layers.first(),
            Some(Layer::BoxCox { .. } | Layer::CountLog { .. })
        ));
        let mut v = z;
        let mut d = 1.0;
        for layer in self.layers[skip..].iter().rev() {
            let (y, dl, _) = layer.inverse(v, 0.0);
            v = y;
            d *= dl;
        }
        d
    }
}

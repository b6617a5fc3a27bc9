//! Sinh-arcsinh-linear warp `theta1 + theta2 sinh(theta3 asinh(y) - theta4)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SalParams {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub theta4: f64,
}

impl SalParams {
    pub const IDENTITY: SalParams = SalParams {
        theta1: 0.0,
        theta2: 1.0,
        theta3: 1.0,
        theta4: 0.0,
    };

    pub fn new(theta1: f64, theta2: f64, theta3: f64, theta4: f64) -> Result<Self> {
        let p = SalParams {
            theta1,
            theta2,
            theta3,
            theta4,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.theta1, self.theta2, self.theta3, self.theta4]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.theta2 <= 0.0 || self.theta3 <= 0.0 {
            return Err(Error::invalid(format!("invalid SAL parameters {self:?}")));
        }
        Ok(())
    }
}

pub fn sal_forward(y: f64, p: &SalParams) -> f64 {
    if *p == SalParams::IDENTITY {
        return y;
    }
    p.theta1 + p.theta2 * (p.theta3 * y.asinh() - p.theta4).sinh()
}

pub fn sal_inverse(z: f64, p: &SalParams) -> f64 {
    if *p == SalParams::IDENTITY {
        return z;
    }
    ((((z - p.theta1) / p.theta2).asinh() + p.theta4) / p.theta3).sinh()
}

/// Forward value and `log dz/dy` in one pass. `log_scale` must equal
/// `ln(theta2) + ln(theta3)`; callers evaluating many points hoist it.
#[inline]
pub(crate) fn sal_forward_log_deriv(y: f64, p: &SalParams, log_scale: f64) -> (f64, f64) {
    let r2 = y.mul_add(y, 1.0);
    let u = p.theta3 * y.asinh() - p.theta4;
    let a = u.abs();
    let em = a.exp_m1();
    let sinh_a = em * (em + 2.0) / (2.0 * (em + 1.0));
    let ep = em + 1.0;
    let log_cosh = a + (1.0 / (ep * ep)).ln_1p() - std::f64::consts::LN_2;
    let z = if *p == SalParams::IDENTITY {
        y
    } else {
        p.theta1 + p.theta2 * sinh_a.copysign(u)
    };
    (z, log_scale + log_cosh - 0.5 * r2.ln())
}

/// `dz/dy`, strictly positive for valid parameters.
pub fn sal_deriv(y: f64, p: &SalParams) -> f64 {
    p.theta2 * (p.theta3 * y.asinh() - p.theta4).cosh() * p.theta3 / y.hypot(1.0)
}

/// `log dz/dy`, stable for large arguments.
pub fn sal_log_deriv(y: f64, p: &SalParams) -> f64 {
    let u = p.theta3 * y.asinh() - p.theta4;
    p.theta2.ln() + log_cosh(u) + p.theta3.ln() - 0.5 * y.mul_add(y, 1.0).ln()
}

/// `dy/dz` of the inverse map.
pub fn sal_inverse_deriv(z: f64, p: &SalParams) -> f64 {
    1.0 / sal_deriv(sal_inverse(z, p), p)
}

fn log_cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

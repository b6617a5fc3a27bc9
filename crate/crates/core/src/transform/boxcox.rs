//! Box-Cox power transformation.

use crate::error::{Error, Result};

/// Below this `|lambda|` the log limit is used.
const LOG_LIMIT: f64 = 1e-12;

/// Distance from the end of the inverse range used for the flagged fallback.
pub(crate) const BOUNDARY_MARGIN: f64 = 1e-6;

/// `(y^lambda - 1) / lambda`, or `log y` at `lambda = 0`.
pub fn boxcox_forward(y: f64, lambda: f64) -> Result<f64> {
    check_domain(y, lambda)?;
    Ok(forward_unchecked(y, lambda))
}

pub(crate) fn check_domain(y: f64, lambda: f64) -> Result<()> {
    if !(y >= 0.0) {
        return Err(Error::domain(format!("Box-Cox needs y >= 0, got {y}")));
    }
    if y == 0.0 && lambda <= 0.0 {
        return Err(Error::domain(format!(
            "Box-Cox with lambda {lambda} needs y > 0"
        )));
    }
    Ok(())
}

pub(crate) fn forward_unchecked(y: f64, lambda: f64) -> f64 {
    if lambda == 1.0 {
        y - 1.0
    } else if lambda.abs() < LOG_LIMIT {
        y.ln()
    } else {
        (lambda * y.ln()).exp_m1() / lambda
    }
}

/// `log dz/dy = (lambda - 1) log y`.
pub fn boxcox_log_deriv(y: f64, lambda: f64) -> f64 {
    (lambda - 1.0) * y.ln()
}

/// Inverse Box-Cox. Values outside the image of `[0, inf)` are moved to
/// the nearest attainable value; the flag reports whether that happened.
pub fn boxcox_inverse(z: f64, lambda: f64) -> (f64, bool) {
    if lambda == 1.0 {
        return ((z + 1.0).max(0.0), z < -1.0);
    }
    if lambda.abs() < LOG_LIMIT {
        return (z.exp(), false);
    }
    let t = lambda * z;
    if lambda < 0.0 {
        // z < -1/lambda is required; at or beyond it, or once y overflows,
        // return the value at the margin instead.
        let y = (t.ln_1p() / lambda).exp();
        if t <= -1.0 || !y.is_finite() {
            return (((-1.0 + BOUNDARY_MARGIN).ln_1p() / lambda).exp(), true);
        }
        return (y, false);
    } else if t < -1.0 {
        return (0.0, true);
    }
    ((t.ln_1p() / lambda).exp(), false)
}

/// `dy/dz` of the inverse, `(1 + lambda z)^(1/lambda - 1)`.
pub fn boxcox_inverse_deriv(z: f64, lambda: f64) -> f64 {
    if lambda.abs() < LOG_LIMIT {
        return z.exp();
    }
    let t = lambda * z;
    if lambda < 0.0 {
        let d = ((1.0 / lambda - 1.0) * t.ln_1p()).exp();
        if t <= -1.0 || !d.is_finite() {
            return ((1.0 / lambda - 1.0) * (-1.0 + BOUNDARY_MARGIN).ln_1p()).exp();
        }
        return d;
    } else if t < -1.0 {
        return 0.0;
    }
    ((1.0 / lambda - 1.0) * t.ln_1p()).exp()
}

//! Started-log layer for counts, `z = log(y + delta) - log(offset)`.

use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.5;

pub fn count_forward(y: f64, delta: f64) -> Result<f64> {
    if !(y >= 0.0) || y.fract() != 0.0 {
        return Err(Error::domain(format!(
            "count response must be a non-negative integer, got {y}"
        )));
    }
    Ok((y + delta).ln())
}

/// Continuous back-transform `exp(z) - delta`, floored at zero (flagged).
pub fn count_inverse(z: f64, delta: f64) -> (f64, bool) {
    let y = z.exp() - delta;
    if y < 0.0 {
        (0.0, true)
    } else {
        (y, false)
    }
}

use crate::{Error, Result};

/// Quantile (pinball) loss at level `q ∈ (0, 1)`.
pub fn pinball_loss(y: f64, yhat: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("quantile level must be in (0, 1), got {q}")));
    }
    Ok(pinball(y, yhat, q))
}

pub(crate) fn pinball(y: f64, yhat: f64, q: f64) -> f64 {
    let e = y - yhat;
    if e >= 0.0 {
        q * e
    } else {
        (q - 1.0) * e
    }
}

/// d(pinball)/d(yhat), matching the branch taken by [`pinball`].
pub(crate) fn pinball_grad(y: f64, yhat: f64, q: f64) -> f64 {
    if y >= yhat {
        -q
    } else {
        1.0 - q
    }
}

/// Huber-style SmoothL1: quadratic below `beta`, linear above.
pub fn smooth_l1(e: f64, beta: f64) -> f64 {
    if e.abs() < beta {
        0.5 * e * e / beta
    } else {
        e.abs() - 0.5 * beta
    }
}

pub(crate) fn smooth_l1_grad(e: f64, beta: f64) -> f64 {
    if e.abs() < beta {
        e / beta
    } else {
        e.signum()
    }
}

//! Regression metrics.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub mae: f64,
    pub rmse: f64,
    /// `None` when the labels have zero variance.
    pub r2: Option<f64>,
    pub n: usize,
}

pub fn regression_metrics(y: &[f64], yhat: &[f64]) -> Result<RegressionReport> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("no samples"));
    }
    let n = y.len() as f64;
    let mut abs = 0.0;
    let mut ss_res = 0.0;
    for (a, b) in y.iter().zip(yhat) {
        let e = a - b;
        abs += e.abs();
        ss_res += e * e;
    }
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok(RegressionReport {
        mae: abs / n,
        rmse: (ss_res / n).sqrt(),
        r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
        n: y.len(),
    })
}

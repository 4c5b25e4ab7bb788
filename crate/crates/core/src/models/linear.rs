//! Ridge-regularized least squares on flattened windows.

use nalgebra::{DMatrix, DVector};

use super::linalg::gemm;
use crate::{Error, Result};

/// Pivots below this fraction of the largest diagonal entry count as singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

/// Solves `min ‖y − Xβ − b‖² + ridge·‖β‖²` with an unpenalized intercept.
///
/// `x` is row-major `n × p`. Features and targets are centred first, so the
/// intercept drops out of the normal equations.
pub fn solve_ridge(x: &[f64], y: &[f64], p: usize, ridge: f64) -> Result<LinearFit> {
    let n = y.len();
    if n == 0 {
        return Err(Error::Empty("no training windows"));
    }
    if x.len() != n * p {
        return Err(Error::LengthMismatch { left: x.len(), right: n * p });
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::invalid(format!("ridge must be >= 0, got {ridge}")));
    }
    let mut x_mean = vec![0.0; p];
    for row in x.chunks_exact(p.max(1)).take(n) {
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= n as f64);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if p == 0 {
        return Ok(LinearFit { coef: vec![], intercept: y_mean });
    }
    let mut xc = x.to_vec();
    for row in xc.chunks_exact_mut(p) {
        for (v, m) in row.iter_mut().zip(&x_mean) {
            *v -= m;
        }
    }
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

    let mut gram = vec![0.0; p * p];
    gemm(&xc, true, &xc, false, &mut gram, p, n, p, 0.0);
    let mut rhs = vec![0.0; p];
    gemm(&xc, true, &yc, false, &mut rhs, p, n, 1, 0.0);
    for i in 0..p {
        gram[i * p + i] += ridge;
    }
    let scale = (0..p).map(|i| gram[i * p + i]).fold(0.0, f64::max);
    if scale <= 0.0 {
        return Err(Error::Singular);
    }
    let a = DMatrix::from_row_slice(p, p, &gram);
    let chol = a.cholesky().ok_or(Error::Singular)?;
    let l = chol.l_dirty();
    if (0..p).any(|i| l[(i, i)] * l[(i, i)] < PIVOT_TOLERANCE * scale) {
        return Err(Error::Singular);
    }
    let beta = chol.solve(&DVector::from_vec(rhs));
    let coef: Vec<f64> = beta.iter().copied().collect();
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::Singular);
    }
    let intercept = y_mean - coef.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();
    Ok(LinearFit { coef, intercept })
}

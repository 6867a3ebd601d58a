//! Small numerical helpers shared by the filters and region estimators.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Base jitter added to a covariance that fails to factorize.
pub fn jitter_scale(cov: &DMatrix<f64>) -> f64 {
    let dim = cov.nrows().max(1) as f64;
    let trace = cov.trace();
    if trace > 0.0 && trace.is_finite() {
        1e-12 * trace / dim
    } else {
        1e-15
    }
}

/// Lower Cholesky factor of `cov`, adding `eps * I` (growing tenfold per
/// attempt) when the plain factorization fails.
pub fn cholesky_jittered(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateCovariance);
    }
    if let Some(chol) = cov.clone().cholesky() {
        return Ok(chol.l());
    }
    let mut eps = jitter_scale(cov);
    for _ in 0..12 {
        let jittered = cov + DMatrix::identity(cov.nrows(), cov.ncols()) * eps;
        if let Some(chol) = jittered.cholesky() {
            return Ok(chol.l());
        }
        eps *= 10.0;
    }
    Err(Error::DegenerateCovariance)
}

/// Covariance regularized until it is positive definite, along with its inverse.
pub fn regularized_with_inverse(cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = cov.nrows();
    let mut eps = 0.0;
    for _ in 0..13 {
        let m = cov + DMatrix::identity(n, n) * eps;
        if let Some(chol) = m.clone().cholesky() {
            return Ok((m, chol.inverse()));
        }
        eps = if eps == 0.0 { jitter_scale(cov) } else { eps * 10.0 };
    }
    Err(Error::DegenerateCovariance)
}

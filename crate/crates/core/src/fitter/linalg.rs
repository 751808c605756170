use nalgebra::{DMatrix, DVector};

use crate::corr_manifold::condition_estimate;

/// Solves `a x = b` for symmetric `a`, by Cholesky when positive definite
/// and by LU otherwise. On failure returns a condition estimate of `a`.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, f64> {
    if let Some(ch) = a.clone().cholesky() {
        let x = ch.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    let cond = condition_estimate(a);
    if !(cond < 1e14) {
        return Err(cond);
    }
    match a.clone().lu().solve(b) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x),
        _ => Err(cond),
    }
}

/// Inverse of a symmetric matrix, symmetrized; condition estimate on failure.
pub(crate) fn sym_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>, f64> {
    let cond = condition_estimate(a);
    if !(cond < 1e14) {
        return Err(cond);
    }
    let inv = match a.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => a.clone().try_inverse().ok_or(cond)?,
    };
    Ok((&inv + inv.transpose()) * 0.5)
}

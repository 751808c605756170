//! The matrix-logarithm parameterization of correlation matrices.
//!
//! A correlation matrix `R` is mapped to the unconstrained vector
//! `gamma = vecl(log R)`. The inverse map fills the diagonal of
//! `vecl^{-1}(gamma)` with the unique vector `x*` for which `exp(G[x*])` has a
//! unit diagonal; `x*` is found by the fixed-point iteration
//! `x <- x - log diag(exp(G[x]))`.
//!
//! `vecl` stacks the strictly lower triangle column by column: for `m = 4`
//! the order is `(1,0), (2,0), (3,0), (2,1), (3,1), (3,2)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{GcrError, Result};

/// Largest tolerated asymmetry `max |A - A^T|` before a matrix is rejected.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest eigenvalue a matrix must exceed for `log` and `inv_sqrt`.
pub const PD_TOL: f64 = 1e-12;
/// Tolerance on `|diag(R) - 1|` for correlation matrices.
pub const UNIT_DIAG_TOL: f64 = 1e-12;
/// Eigenvalue gap below which the divided difference uses its limit.
pub const EIGEN_GAP_TOL: f64 = 1e-10;

/// Number of strictly-lower-triangular entries of an `m x m` matrix.
#[inline]
pub fn vecl_len(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Position of entry `(j, k)`, `j > k`, inside `vecl`.
#[inline]
pub fn vecl_index(m: usize, j: usize, k: usize) -> usize {
    debug_assert!(j > k && j < m);
    k * (2 * m - k - 1) / 2 + (j - k - 1)
}

/// All `(j, k)` pairs with `j > k` in `vecl` order.
pub fn vecl_pairs(m: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(vecl_len(m));
    for k in 0..m {
        for j in (k + 1)..m {
            out.push((j, k));
        }
    }
    out
}

/// Strictly lower triangle of a square matrix in `vecl` order.
pub fn vecl(a: &DMatrix<f64>) -> Vec<f64> {
    let m = a.nrows();
    let mut out = Vec::with_capacity(vecl_len(m));
    for k in 0..m {
        for j in (k + 1)..m {
            out.push(a[(j, k)]);
        }
    }
    out
}

/// Symmetric matrix with `values` off the diagonal and `diag` on it.
pub fn unvecl(m: usize, values: &[f64], diag: &[f64]) -> DMatrix<f64> {
    debug_assert_eq!(values.len(), vecl_len(m));
    debug_assert_eq!(diag.len(), m);
    let mut g = DMatrix::zeros(m, m);
    let mut idx = 0;
    for k in 0..m {
        g[(k, k)] = diag[k];
        for j in (k + 1)..m {
            g[(j, k)] = values[idx];
            g[(k, j)] = values[idx];
            idx += 1;
        }
    }
    g
}

fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// A real symmetric matrix. No definiteness or diagonal requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates symmetry and stores `(A + A^T) / 2`.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(GcrError::Validation(format!(
                "expected a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(GcrError::Validation("matrix has non-finite entries".into()));
        }
        let asym = max_asymmetry(&a);
        if asym >= SYMMETRY_TOL {
            return Err(GcrError::Validation(format!(
                "matrix is not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        let sym = (&a + a.transpose()) * 0.5;
        Ok(SymMatrix(sym))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Scalar function applied through the spectral decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFunction {
    Log,
    Exp,
    InvSqrt,
    Sqrt,
}

/// Computes `Q f(Lambda) Q^T` for `A = Q Lambda Q^T`.
pub fn sym_matrix_function(a: &SymMatrix, which: MatrixFunction) -> Result<SymMatrix> {
    let eig = SymmetricEigen::new(a.0.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let needs_pd = !matches!(which, MatrixFunction::Exp);
    if needs_pd && !(min > PD_TOL) {
        return Err(GcrError::NotPositiveDefinite { min_eigenvalue: min });
    }
    let f: fn(f64) -> f64 = match which {
        MatrixFunction::Log => f64::ln,
        MatrixFunction::Exp => f64::exp,
        MatrixFunction::InvSqrt => |v| 1.0 / v.sqrt(),
        MatrixFunction::Sqrt => |v| v.max(0.0).sqrt(),
    };
    let mapped = eig.eigenvalues.map(f);
    Ok(SymMatrix(reconstruct(&eig.eigenvectors, &mapped)))
}

/// `Q diag(values) Q^T`, symmetrized.
pub(crate) fn reconstruct(q: &DMatrix<f64>, values: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = q.clone();
    for (c, v) in values.iter().enumerate() {
        scaled.column_mut(c).scale_mut(*v);
    }
    let out = scaled * q.transpose();
    (&out + out.transpose()) * 0.5
}

/// A valid correlation matrix: symmetric, unit diagonal, positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix(DMatrix<f64>);

impl CorrMatrix {
    pub fn new(r: DMatrix<f64>) -> Result<Self> {
        let sym = SymMatrix::new(r)?;
        let r = sym.0;
        let m = r.nrows();
        if m == 0 {
            return Err(GcrError::Validation("correlation matrix must be non-empty".into()));
        }
        for i in 0..m {
            let d = r[(i, i)];
            if (d - 1.0).abs() >= UNIT_DIAG_TOL {
                return Err(GcrError::Validation(format!(
                    "diagonal entry {i} is {d}, expected 1"
                )));
            }
        }
        let eig = SymmetricEigen::new(r.clone());
        let min = eig.eigenvalues.min();
        if !(min > 0.0) {
            return Err(GcrError::NotPositiveDefinite { min_eigenvalue: min });
        }
        Ok(CorrMatrix(r))
    }

    pub fn identity(m: usize) -> Self {
        CorrMatrix(DMatrix::identity(m, m))
    }

    /// Trusted constructor for matrices produced by the fixed point.
    pub(crate) fn from_trusted(r: DMatrix<f64>) -> Self {
        CorrMatrix(r)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Pairwise correlations in `vecl` order.
    pub fn pairwise(&self) -> Vec<f64> {
        vecl(&self.0)
    }
}

/// The unconstrained image `vecl(log R)` of an `m x m` correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaVector {
    dim: usize,
    values: Vec<f64>,
}

impl GammaVector {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(GcrError::Validation("gamma vector needs m >= 1".into()));
        }
        if values.len() != vecl_len(dim) {
            return Err(GcrError::Validation(format!(
                "gamma vector for m={dim} needs {} entries, got {}",
                vecl_len(dim),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GcrError::Validation("gamma vector has non-finite entries".into()));
        }
        Ok(GammaVector { dim, values })
    }

    pub fn zeros(dim: usize) -> Self {
        GammaVector { dim, values: vec![0.0; vecl_len(dim)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `gamma = vecl(log R)`.
pub fn gz_transform(r: &CorrMatrix) -> Result<GammaVector> {
    let log_r = sym_matrix_function(&SymMatrix(r.0.clone()), MatrixFunction::Log)?;
    Ok(GammaVector { dim: r.dim(), values: vecl(&log_r.0) })
}

/// Controls for the diagonal fixed-point iteration.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { tol: 1e-12, max_iter: 200 }
    }
}

/// Spectral decomposition of `log R = Q diag(lambda) Q^T`.
#[derive(Debug, Clone)]
pub struct LogSpectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl LogSpectrum {
    /// `log |R|`.
    pub fn logdet(&self) -> f64 {
        self.eigenvalues.sum()
    }

    /// `R^t = Q exp(t Lambda) Q^T`.
    pub fn power(&self, t: f64) -> DMatrix<f64> {
        reconstruct(&self.eigenvectors, &self.eigenvalues.map(|l| (t * l).exp()))
    }
}

/// Full output of the inverse transform.
#[derive(Debug, Clone)]
pub struct InverseSolution {
    pub corr: CorrMatrix,
    /// The diagonal `x*` of `log R`.
    pub diagonal: Vec<f64>,
    pub iterations: usize,
    /// Residual history `max |diag(exp(G[x_k])) - 1|`.
    pub residuals: Vec<f64>,
    pub spectrum: LogSpectrum,
}

/// Recovers the correlation matrix whose `vecl(log R)` equals `gamma`,
/// starting the fixed point at `x = 0`.
pub fn gz_inverse(gamma: &GammaVector) -> Result<CorrMatrix> {
    Ok(gz_inverse_with(gamma, None, FixedPointOptions::default())?.corr)
}

/// Inverse transform with an explicit starting diagonal and options.
pub fn gz_inverse_with(
    gamma: &GammaVector,
    start: Option<&[f64]>,
    opts: FixedPointOptions,
) -> Result<InverseSolution> {
    let m = gamma.dim;
    let mut x: Vec<f64> = match start {
        Some(s) if s.len() == m => s.to_vec(),
        Some(s) => {
            return Err(GcrError::Validation(format!(
                "starting diagonal has length {}, expected {m}",
                s.len()
            )))
        }
        None => vec![0.0; m],
    };
    let mut g = unvecl(m, &gamma.values, &x);
    let mut residuals = Vec::new();
    for iter in 0..=opts.max_iter {
        for (a, xa) in x.iter().enumerate() {
            g[(a, a)] = *xa;
        }
        let eig = SymmetricEigen::new(g.clone());
        let expd = eig.eigenvalues.map(f64::exp);
        let q = &eig.eigenvectors;
        let mut residual = 0.0f64;
        let mut diag = vec![0.0; m];
        for a in 0..m {
            let mut s = 0.0;
            for c in 0..m {
                s += q[(a, c)] * q[(a, c)] * expd[c];
            }
            diag[a] = s;
            residual = residual.max((s - 1.0).abs());
        }
        residuals.push(residual);
        if !residual.is_finite() {
            return Err(GcrError::Numerical("fixed-point iterate became non-finite".into()));
        }
        if residual < opts.tol {
            let mut r = reconstruct(q, &expd);
            // Remove the last ~1e-13 of diagonal drift.
            let scale: Vec<f64> = (0..m).map(|a| 1.0 / r[(a, a)].sqrt()).collect();
            for i in 0..m {
                for j in 0..m {
                    r[(i, j)] *= scale[i] * scale[j];
                }
                r[(i, i)] = 1.0;
            }
            return Ok(InverseSolution {
                corr: CorrMatrix::from_trusted(r),
                diagonal: x,
                iterations: iter,
                residuals,
                spectrum: LogSpectrum { eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors },
            });
        }
        if iter == opts.max_iter {
            return Err(GcrError::NoConvergence { iterations: iter, residual });
        }
        for a in 0..m {
            x[a] -= diag[a].ln();
        }
    }
    unreachable!("loop returns on its final iteration")
}

/// Divided difference of `exp` at `(a, b)`.
#[inline]
fn exp_divided_difference(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d.abs() < EIGEN_GAP_TOL {
        a.exp()
    } else {
        b.exp() * d.exp_m1() / d
    }
}

/// Spectrum of `log R` computed from `R` itself.
pub fn log_spectrum(r: &CorrMatrix) -> Result<LogSpectrum> {
    let eig = SymmetricEigen::new(r.0.clone());
    let min = eig.eigenvalues.min();
    if !(min > PD_TOL) {
        return Err(GcrError::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok(LogSpectrum { eigenvalues: eig.eigenvalues.map(f64::ln), eigenvectors: eig.eigenvectors })
}

/// Jacobian `d rho / d gamma` of the pairwise correlations with respect to
/// the free entries of `log R`, both in `vecl` order.
pub fn jacobian_rho_gamma(r: &CorrMatrix) -> Result<DMatrix<f64>> {
    jacobian_from_spectrum(&log_spectrum(r)?)
}

/// Jacobian from a precomputed spectrum of `log R`.
pub fn jacobian_from_spectrum(spec: &LogSpectrum) -> Result<DMatrix<f64>> {
    let n = vecl_len(spec.eigenvalues.len());
    jacobian_apply(spec, &DMatrix::identity(n, n))
}

/// Product of the Jacobian with `dirs`, whose columns are directions in
/// `gamma` space. Costs one Fréchet derivative per column, so `J W` for a
/// thin `W` is much cheaper than forming `J`.
///
/// Uses the Fréchet derivative of the matrix exponential
/// `L(H) = Q (Xi o Q^T H Q) Q^T`, which is the action of
/// `(Q (x) Q) Xi (Q (x) Q)^T` on `vec(H)`, and projects out the diagonal
/// directions so that `diag(R)` stays at one.
pub fn jacobian_apply(spec: &LogSpectrum, dirs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = spec.eigenvalues.len();
    let npairs = vecl_len(m);
    if dirs.nrows() != npairs {
        return Err(GcrError::Validation(format!(
            "direction matrix has {} rows, expected {npairs}",
            dirs.nrows()
        )));
    }
    let q = &spec.eigenvectors;
    let lam = &spec.eigenvalues;
    let xi = DMatrix::from_fn(m, m, |c, d| exp_divided_difference(lam[c], lam[d]));
    let qt = q.transpose();
    let frechet = |h: &DMatrix<f64>| -> DMatrix<f64> {
        let inner = (&qt * h * q).component_mul(&xi);
        q * inner * &qt
    };
    let diag_dirs: Vec<DMatrix<f64>> = (0..m)
        .map(|b| {
            let mut e = DMatrix::zeros(m, m);
            e[(b, b)] = 1.0;
            frechet(&e)
        })
        .collect();
    let constraint = DMatrix::from_fn(m, m, |a, b| diag_dirs[b][(a, a)]);
    let lu = constraint.clone().lu();
    if !lu.is_invertible() {
        return Err(GcrError::Numerical(format!(
            "diagonal constraint matrix is singular (condition estimate {:.3e})",
            condition_estimate(&constraint)
        )));
    }
    let pairs = vecl_pairs(m);
    let mut out = DMatrix::zeros(npairs, dirs.ncols());
    for col in 0..dirs.ncols() {
        let mut h = DMatrix::zeros(m, m);
        for (p, &(j, k)) in pairs.iter().enumerate() {
            h[(j, k)] = dirs[(p, col)];
            h[(k, j)] = dirs[(p, col)];
        }
        let mut l = frechet(&h);
        let rhs = DVector::from_fn(m, |a, _| l[(a, a)]);
        let coef = lu
            .solve(&rhs)
            .ok_or_else(|| GcrError::Numerical("diagonal constraint solve failed".into()))?;
        for (b, lb) in diag_dirs.iter().enumerate() {
            l -= lb * coef[b];
        }
        for (p, &(j, k)) in pairs.iter().enumerate() {
            out[(p, col)] = l[(j, k)];
        }
    }
    Ok(out)
}

/// Reference Jacobian assembled literally from elimination matrices and the
/// `m^2 x m^2` Kronecker form `A = (Q (x) Q) Xi (Q (x) Q)^T`.
///
/// Costs `O(m^6)`; kept as an independent check of [`jacobian_from_spectrum`].
pub fn jacobian_rho_gamma_kron(r: &CorrMatrix) -> Result<DMatrix<f64>> {
    let spec = log_spectrum(r)?;
    let m = r.dim();
    let m2 = m * m;
    let q = &spec.eigenvectors;
    let lam = &spec.eigenvalues;
    let qq = q.kronecker(q);
    let mut xi = DMatrix::zeros(m2, m2);
    // vec() is column-major: entry (a, b) sits at b * m + a.
    for j in 0..m {
        for k in 0..m {
            xi[(j * m + k, j * m + k)] = exp_divided_difference(lam[j], lam[k]);
        }
    }
    let a = &qq * xi * qq.transpose();
    let pairs = vecl_pairs(m);
    let npairs = pairs.len();
    let mut el = DMatrix::zeros(npairs, m2);
    let mut eu = DMatrix::zeros(npairs, m2);
    for (p, (j, k)) in pairs.iter().enumerate() {
        el[(p, k * m + j)] = 1.0;
        eu[(p, j * m + k)] = 1.0;
    }
    let mut ed = DMatrix::zeros(m, m2);
    for i in 0..m {
        ed[(i, i * m + i)] = 1.0;
    }
    let inner = &ed * &a * ed.transpose();
    let inner_inv = inner.clone().try_inverse().ok_or_else(|| {
        GcrError::Numerical(format!(
            "E_d A E_d^T is singular (condition estimate {:.3e})",
            condition_estimate(&inner)
        ))
    })?;
    let proj = DMatrix::identity(m2, m2) - &a * ed.transpose() * inner_inv * &ed;
    Ok(&el * proj * a * (&el + &eu).transpose())
}

/// Ratio of extreme absolute eigenvalues of the symmetric part, or of the
/// singular values for a general matrix.
pub fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).abs().max()
    }

    fn corr2(rho: f64) -> CorrMatrix {
        CorrMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])).unwrap()
    }

    #[test]
    fn vecl_order_is_column_major_lower() {
        assert_eq!(vecl_pairs(4), vec![(1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (3, 2)]);
        for (p, (j, k)) in vecl_pairs(6).into_iter().enumerate() {
            assert_eq!(vecl_index(6, j, k), p);
        }
    }

    #[test]
    fn log_and_exp_of_identity() {
        let i3 = SymMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let log = sym_matrix_function(&i3, MatrixFunction::Log).unwrap();
        assert!(log.as_matrix().abs().max() < 1e-15);
        let zero = SymMatrix::new(DMatrix::zeros(3, 3)).unwrap();
        let exp = sym_matrix_function(&zero, MatrixFunction::Exp).unwrap();
        assert!(max_abs_diff(exp.as_matrix(), &DMatrix::identity(3, 3)) < 1e-15);
    }

    #[test]
    fn log_of_two_by_two_is_fisher_z() {
        let r = corr2(0.6);
        let log = sym_matrix_function(&SymMatrix::new(r.as_matrix().clone()).unwrap(), MatrixFunction::Log)
            .unwrap();
        // eigenvalues 1 +- rho give off-diagonal (ln(1+rho) - ln(1-rho)) / 2
        let expected = 0.5 * (1.6f64.ln() - 0.4f64.ln());
        assert!((log.as_matrix()[(1, 0)] - expected).abs() < 1e-14);
        assert!((expected - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn non_pd_log_reports_smallest_eigenvalue() {
        let a = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        match sym_matrix_function(&a, MatrixFunction::Log) {
            Err(GcrError::NotPositiveDefinite { min_eigenvalue }) => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(sym_matrix_function(&a, MatrixFunction::InvSqrt).is_err());
        assert!(sym_matrix_function(&a, MatrixFunction::Exp).is_ok());
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SymMatrix::new(a), Err(GcrError::Validation(_))));
    }

    #[test]
    fn identity_round_trips() {
        let g = gz_transform(&CorrMatrix::identity(4)).unwrap();
        assert_eq!(g.values().len(), 6);
        assert!(g.values().iter().all(|v| v.abs() < 1e-15));
        let r = gz_inverse(&GammaVector::zeros(3)).unwrap();
        assert!(max_abs_diff(r.as_matrix(), &DMatrix::identity(3, 3)) < 1e-15);
    }

    #[test]
    fn inverse_of_ln2_is_point_six() {
        let r = gz_inverse(&GammaVector::new(2, vec![2f64.ln()]).unwrap()).unwrap();
        assert!((r.as_matrix()[(1, 0)] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn size_one_is_trivial() {
        let r = gz_inverse(&GammaVector::zeros(1)).unwrap();
        assert_eq!(r.as_matrix()[(0, 0)], 1.0);
        let j = jacobian_rho_gamma(&r).unwrap();
        assert_eq!(j.nrows(), 0);
    }

    #[test]
    fn jacobian_at_identity_is_identity() {
        let j = jacobian_rho_gamma(&CorrMatrix::identity(5)).unwrap();
        assert!(max_abs_diff(&j, &DMatrix::identity(10, 10)) < 1e-12);
    }

    #[test]
    fn jacobian_two_by_two_is_sech_squared() {
        let j = jacobian_rho_gamma(&corr2(0.6)).unwrap();
        assert!((j[(0, 0)] - 0.64).abs() < 1e-12);
    }

    #[test]
    fn fast_jacobian_matches_kronecker_form() {
        let gamma = GammaVector::new(4, vec![0.3, -0.2, 0.1, 0.5, -0.4, 0.25]).unwrap();
        let r = gz_inverse(&gamma).unwrap();
        let a = jacobian_rho_gamma(&r).unwrap();
        let b = jacobian_rho_gamma_kron(&r).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-12, "{a}\n{b}");
    }

    #[test]
    fn repeated_eigenvalues_use_limit_branch() {
        // Exchangeable 3x3 has a doubly repeated eigenvalue.
        let r = gz_inverse(&GammaVector::new(3, vec![0.4, 0.4, 0.4]).unwrap()).unwrap();
        let j = jacobian_rho_gamma(&r).unwrap();
        assert!(j.iter().all(|v| v.is_finite()));
        assert!(max_abs_diff(&j, &jacobian_rho_gamma_kron(&r).unwrap()) < 1e-10);
    }
}

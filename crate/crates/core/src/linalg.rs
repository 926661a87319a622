//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, Dyn};

/// Cholesky factorization that also rejects numerically singular matrices:
/// the squared ratio of the smallest to the largest pivot must exceed
/// `rel_tol`.
pub fn checked_cholesky(a: &DMatrix<f64>, rel_tol: f64) -> Option<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(a.clone())?;
    let diag = chol.l_dirty().diagonal();
    let max = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(max > 0.0) || (min / max).powi(2) <= rel_tol {
        return None;
    }
    Some(chol)
}

/// Squared pivot-ratio estimate of the condition number of a symmetric
/// positive definite matrix from its Cholesky factor.
pub fn pivot_condition(chol: &Cholesky<f64, Dyn>) -> f64 {
    let diag = chol.l_dirty().diagonal();
    let max = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    (max / min).powi(2)
}

/// Moore–Penrose pseudoinverse of a symmetric positive semidefinite matrix,
/// truncating eigenvalues below `rel_tol * max_eigenvalue`.
pub fn psd_pinv(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = rel_tol * max;
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff && lambda > 0.0 {
            let v = eig.eigenvectors.column(i);
            out += (v * v.transpose()) / lambda;
        }
    }
    out
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |m, v| m.max(*v))
}

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Condition number above which a symmetric positive definite matrix is
/// treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

/// Extreme eigenvalues of a symmetric matrix.
pub fn sym_eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Cholesky factor of an SPD matrix whose condition estimate stays below
/// [`SINGULAR_CONDITION`].
pub fn checked_cholesky(m: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let (lo, hi) = sym_eig_range(&m);
    if !(lo > 0.0) || hi / lo > SINGULAR_CONDITION {
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        return Err(Error::RankDeficient(cond));
    }
    Cholesky::new(m).ok_or(Error::RankDeficient(f64::INFINITY))
}

/// `A A^T`.
pub fn row_gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    a * a.transpose()
}

/// Least-squares solution of `a x ≈ b` for a tall or square `a` with full
/// column rank, via thin QR.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let (m, n) = a.shape();
    if m < n {
        return None;
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().amax();
    if diag_max == 0.0 || r.diagonal().iter().any(|v| v.abs() <= 1e-12 * diag_max) {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb)
}

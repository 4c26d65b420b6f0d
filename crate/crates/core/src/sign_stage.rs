//! ℓ2 stage: Tikhonov-regularized least squares used to guess the sign
//! pattern of the sparse parameter vector.
//!
//! The estimate `Aᵀ(AAᵀ + λI)⁻¹ y` is always computed through the m×m
//! system. The n×n form `(AᵀA + λI)⁻¹Aᵀy` has n−m eigenvalues equal to λ,
//! which makes it useless for the tiny λ this stage relies on.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{checked_cholesky, row_gram, sym_eig_range};
use crate::model::{generalized_sign, PerturbedProblem, SignVector};

/// Relative weight used when λ is derived from the data.
pub const DEFAULT_RELATIVE_LAMBDA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    /// Fixed regularization weight.
    Absolute(f64),
    /// `factor * trace(AAᵀ) / m`, i.e. scaled by the mean eigenvalue of the
    /// row Gram matrix.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TikhonovConfig {
    pub lambda: Lambda,
}

impl Default for TikhonovConfig {
    fn default() -> Self {
        TikhonovConfig { lambda: Lambda::Relative(DEFAULT_RELATIVE_LAMBDA) }
    }
}

impl TikhonovConfig {
    pub fn absolute(lambda: f64) -> Self {
        TikhonovConfig { lambda: Lambda::Absolute(lambda) }
    }

    /// Resolves the weight against a given row Gram matrix.
    pub fn resolve(&self, gram: &DMatrix<f64>) -> f64 {
        match self.lambda {
            Lambda::Absolute(v) => v,
            Lambda::Relative(f) => f * gram.trace() / gram.nrows() as f64,
        }
    }
}

/// Regularized estimate `x♯` together with the quantities checked on the way.
#[derive(Debug, Clone)]
pub struct TikhonovEstimate {
    pub x: DVector<f64>,
    pub lambda: f64,
    /// Extreme eigenvalues of `AAᵀ`.
    pub gram_eig: (f64, f64),
}

/// `Aᵀ(AAᵀ + λI)⁻¹ y` with diagnostics.
pub fn tikhonov_solve(p: &PerturbedProblem, cfg: &TikhonovConfig) -> Result<TikhonovEstimate> {
    let a = p.a_bar.as_matrix();
    let m = a.nrows();
    let gram = row_gram(a);
    let lambda = cfg.resolve(&gram);
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let (lo, hi) = sym_eig_range(&gram);
    if !(lo > 0.0) || hi / lo > crate::linalg::SINGULAR_CONDITION {
        return Err(Error::RankDeficient(if lo > 0.0 { hi / lo } else { f64::INFINITY }));
    }
    if lambda >= lo {
        return Err(Error::RegularizationTooLarge { lambda, min_eig: lo });
    }
    let chol = checked_cholesky(gram + DMatrix::identity(m, m) * lambda)?;
    let w = chol.solve(&p.y_bar);
    let x = a.transpose() * w;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient(f64::INFINITY));
    }
    Ok(TikhonovEstimate { x, lambda, gram_eig: (lo, hi) })
}

pub fn tikhonov_estimate(p: &PerturbedProblem, cfg: &TikhonovConfig) -> Result<DVector<f64>> {
    tikhonov_solve(p, cfg).map(|e| e.x)
}

/// Sign pattern of the regularized least-squares estimate.
pub fn estimate_signs(p: &PerturbedProblem, cfg: &TikhonovConfig) -> Result<SignVector> {
    let x = tikhonov_estimate(p, cfg)?;
    Ok(generalized_sign(x.as_slice()))
}

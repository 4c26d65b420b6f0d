//! Sparse recovery for linear regression with bounded perturbations on both
//! the regressor matrix and the measurements.
//!
//! The main method runs in two stages: a Tikhonov-regularized least-squares
//! solve estimates the sign pattern of the parameter vector, then a linear
//! program over the estimated orthant minimizes the ℓ1 norm subject to the
//! perturbation bounds. Baselines, theoretical diagnostics, instance
//! generators and a Monte Carlo harness are included.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x >= 0.0)` rejects NaN as well

pub mod analysis;
pub mod baselines;
pub mod datagen;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod instance;
pub mod l1_stage;
mod linalg;
pub mod lp;
pub mod model;
pub mod sign_stage;

pub use error::{Error, Result};
pub use l1_stage::{build_lp, l2l1_recover, recover_with_signs, refit_on_support, RecoveryConfig};
pub use lp::{solve_lp, InteriorPoint, LpConfig, LpProblem, LpSolution, LpSolver, LpStatus};
pub use model::{
    generalized_sign, normalize_columns, polish, support_match, DenseMatrix, GroundTruth, PerturbedProblem,
    RecoveryResult, RecoveryStatus, SignVector, Support,
};
pub use sign_stage::{estimate_signs, tikhonov_estimate, TikhonovConfig};

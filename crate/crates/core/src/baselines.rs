//! Reference methods: basis pursuit, ℓ∞-constrained basis pursuit
//! denoising, Lasso, and exhaustive enumeration of the LP relaxation over
//! every orthant.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::l1_stage::recover_with_signs;
use crate::lp::{InteriorPoint, LpConfig, LpProblem, LpSolver, LpStatus};
use crate::model::{polish, DenseMatrix, PerturbedProblem, RecoveryResult, RecoveryStatus, SignVector};

/// Largest `n` accepted by [`orthant_oracle`].
pub const ORTHANT_LIMIT: usize = 16;

/// Multiples of `λ_max = 2‖Aᵀy‖∞` tried when Lasso's weight is selected per instance.
pub const LASSO_GRID: [f64; 9] = [0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001];

#[derive(Debug, Clone, PartialEq)]
pub enum LassoLambda {
    Fixed(f64),
    /// Per-instance selection over `factor * λ_max`.
    Grid(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub lasso_lambda: LassoLambda,
    /// `None` uses the measurement bound `Δ_y`.
    pub bpdn_eta: Option<f64>,
    pub max_iter: usize,
    pub step_tol: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            lasso_lambda: LassoLambda::Grid(LASSO_GRID.to_vec()),
            bpdn_eta: None,
            max_iter: 5000,
            step_tol: 1e-7,
        }
    }
}

fn split_lp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let mut out = DMatrix::zeros(m, 2 * n);
    out.view_mut((0, 0), (m, n)).copy_from(a);
    out.view_mut((0, n), (m, n)).copy_from(&(-a));
    out
}

fn merge_split(u: &DVector<f64>, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|i| u[i] - u[n + i]))
}

fn split_solve(lp: &LpProblem, n: usize, cfg: &LpConfig) -> Result<DVector<f64>> {
    let sol = InteriorPoint::new(*cfg).solve(lp);
    match sol.status {
        LpStatus::Optimal => Ok(merge_split(&sol.z, n)),
        LpStatus::Infeasible => Err(Error::Infeasible),
        _ => Err(Error::MaxIterations(cfg.max_iter)),
    }
}

/// `min ‖x‖₁ s.t. Ā x = ȳ` through `x = x⁺ − x⁻`.
pub fn basis_pursuit(a_bar: &DenseMatrix, y_bar: &DVector<f64>, cfg: &LpConfig) -> Result<DVector<f64>> {
    let n = a_bar.cols();
    if a_bar.rows() != y_bar.len() {
        return Err(Error::DimensionMismatch("A rows vs y length".into()));
    }
    let lp = LpProblem::inequality(DVector::from_element(2 * n, 1.0), DMatrix::zeros(0, 2 * n), DVector::zeros(0))
        .with_equalities(split_lp(a_bar), y_bar.clone());
    split_solve(&lp, n, cfg)
}

/// `min ‖x‖₁ s.t. ‖Ā x − ȳ‖∞ ≤ η`; `η = 0` is handled as [`basis_pursuit`].
pub fn bpdn_inf(a_bar: &DenseMatrix, y_bar: &DVector<f64>, eta: f64, cfg: &LpConfig) -> Result<DVector<f64>> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidInput(format!("eta must be nonnegative, got {eta}")));
    }
    if eta == 0.0 {
        return basis_pursuit(a_bar, y_bar, cfg);
    }
    let (m, n) = (a_bar.rows(), a_bar.cols());
    if m != y_bar.len() {
        return Err(Error::DimensionMismatch("A rows vs y length".into()));
    }
    let s = split_lp(a_bar);
    let mut c = DMatrix::zeros(2 * m, 2 * n);
    c.view_mut((0, 0), (m, 2 * n)).copy_from(&s);
    c.view_mut((m, 0), (m, 2 * n)).copy_from(&(-&s));
    let mut g = DVector::zeros(2 * m);
    for i in 0..m {
        g[i] = y_bar[i] + eta;
        g[m + i] = -y_bar[i] + eta;
    }
    let lp = LpProblem::inequality(DVector::from_element(2 * n, 1.0), c, g);
    split_solve(&lp, n, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoOutput {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective `‖Āx − ȳ‖² + λ‖x‖₁` at every iterate, starting point included.
    pub objectives: Vec<f64>,
}

/// Estimate of `‖AᵀA‖₂` from power iteration.
pub fn gram_norm_estimate(a: &DMatrix<f64>, iterations: usize) -> f64 {
    let n = a.ncols();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i % 7) as f64 * 0.1);
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..iterations {
        let w = a.tr_mul(&(a * &v));
        est = w.norm();
        if est == 0.0 {
            return 0.0;
        }
        v = w / est;
    }
    est
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Proximal gradient (ISTA) on `‖Āx − ȳ‖² + λ‖x‖₁` with step `1/L`,
/// `L = 2‖ĀᵀĀ‖₂` from 20 power iterations.
pub fn lasso(a_bar: &DenseMatrix, y_bar: &DVector<f64>, lambda: f64, max_iter: usize, step_tol: f64) -> Result<LassoOutput> {
    lasso_from(a_bar, y_bar, lambda, max_iter, step_tol, None)
}

/// [`lasso`] started from `x0` (zero when `None`).
pub fn lasso_from(
    a_bar: &DenseMatrix,
    y_bar: &DVector<f64>,
    lambda: f64,
    max_iter: usize,
    step_tol: f64,
    x0: Option<&DVector<f64>>,
) -> Result<LassoOutput> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let a = a_bar.as_matrix();
    let n = a.ncols();
    let lip = 2.0 * gram_norm_estimate(a, 20);
    let mut x = x0.cloned().unwrap_or_else(|| DVector::zeros(n));
    if lip == 0.0 {
        return Ok(LassoOutput { x: DVector::zeros(n), iterations: 0, converged: true, objectives: vec![y_bar.norm_squared()] });
    }
    let step = 1.0 / lip;
    let thr = lambda * step;
    let mut resid = a * &x - y_bar;
    let mut objectives = vec![resid.norm_squared() + lambda * x.lp_norm(1)];
    for it in 0..max_iter {
        let grad = a.tr_mul(&resid) * 2.0;
        let next = DVector::from_iterator(n, x.iter().zip(grad.iter()).map(|(xi, gi)| soft_threshold(xi - step * gi, thr)));
        let change = (&next - &x).norm();
        let scale = next.norm().max(x.norm()).max(1e-300);
        x = next;
        resid = a * &x - y_bar;
        objectives.push(resid.norm_squared() + lambda * x.lp_norm(1));
        if change <= step_tol * scale || change == 0.0 {
            return Ok(LassoOutput { x, iterations: it + 1, converged: true, objectives });
        }
    }
    Ok(LassoOutput { x, iterations: max_iter, converged: false, objectives })
}

/// Lasso with λ chosen over `factors * 2‖Āᵀȳ‖∞`. The grid is walked from
/// the largest weight down with warm starts; the pick is the solution whose
/// ℓ∞ residual is closest to the worst-case level `Δ_y + Δ_A‖x‖₁` that the
/// perturbation bounds allow. Returns the solution and the chosen λ.
pub fn lasso_select(p: &PerturbedProblem, factors: &[f64], max_iter: usize, step_tol: f64) -> Result<(LassoOutput, f64)> {
    if factors.is_empty() {
        return Err(Error::InvalidInput("empty lasso grid".into()));
    }
    let a = p.a_bar.as_matrix();
    let lambda_max = 2.0 * a.tr_mul(&p.y_bar).amax();
    if lambda_max == 0.0 {
        let out = LassoOutput { x: DVector::zeros(p.n()), iterations: 0, converged: true, objectives: vec![0.0] };
        return Ok((out, 0.0));
    }
    let mut sorted = factors.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut best: Option<(f64, LassoOutput, f64)> = None;
    let mut warm: Option<DVector<f64>> = None;
    for f in sorted {
        let lambda = f * lambda_max;
        let out = lasso_from(&p.a_bar, &p.y_bar, lambda, max_iter, step_tol, warm.as_ref())?;
        let resid = (a * &out.x - &p.y_bar).amax();
        let target = p.bound_y + p.bound_a * out.x.lp_norm(1);
        let score = (resid - target).abs();
        warm = Some(out.x.clone());
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, out, lambda));
        }
    }
    let (_, out, lambda) = best.expect("grid is nonempty");
    Ok((out, lambda))
}

/// Exhaustive search over all `2ⁿ` orthants: the feasible LP solution of
/// smallest ℓ1 norm, ties going to the lexicographically smallest sign
/// pattern (−1 before +1).
pub fn orthant_oracle(p: &PerturbedProblem, tau: f64, cfg: &LpConfig) -> Result<RecoveryResult> {
    let n = p.n();
    if n > ORTHANT_LIMIT {
        return Err(Error::TooLarge { n, limit: ORTHANT_LIMIT });
    }
    let solver = InteriorPoint::new(*cfg);
    let results: Vec<Result<RecoveryResult>> = (0..1u64 << n)
        .into_par_iter()
        .map(|idx| recover_with_signs(p, &SignVector::from_index(n, idx), tau, &solver).map(|(r, _)| r))
        .collect();

    let mut best: Option<RecoveryResult> = None;
    for r in results {
        let r = r?;
        if r.status != RecoveryStatus::Solved {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => r.objective < b.objective - 1e-7 * (1.0 + b.objective.abs()),
        };
        if better {
            best = Some(r);
        }
    }
    Ok(best.unwrap_or_else(|| RecoveryResult::failed(n, tau, RecoveryStatus::Infeasible, None)))
}

/// Wraps a plain estimate from a baseline into a polished result.
pub fn baseline_result(x: DVector<f64>, tau: f64) -> RecoveryResult {
    let mut r = RecoveryResult::solved(x, tau, None);
    r.support_estimate = polish(r.estimate.as_slice(), tau);
    r
}

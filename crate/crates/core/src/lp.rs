//! Dense linear programming kernel.
//!
//! Problems have the form
//!
//! ```text
//! min  costsᵀ z   s.t.  C z ≤ g,  C_eq z = g_eq,  z ≥ 0
//! ```
//!
//! and are solved by a Mehrotra predictor-corrector interior-point method
//! on the slack form `C z + w = g`. The normal equations are assembled as
//! `K D_z Kᵀ + diag(D_w, 0)` with `K = [C; C_eq]`, so the slack columns never
//! appear explicitly.
//!
//! When the main solve does not converge the solver runs a phase-1 problem
//! (minimize the largest constraint violation) to separate infeasible
//! inputs from numerical trouble.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub costs: DVector<f64>,
    pub c: DMatrix<f64>,
    pub g: DVector<f64>,
    /// Equality rows; zero rows when absent.
    pub c_eq: DMatrix<f64>,
    pub g_eq: DVector<f64>,
}

impl LpProblem {
    /// Inequality-only problem `min costsᵀz s.t. Cz ≤ g, z ≥ 0`.
    pub fn inequality(costs: DVector<f64>, c: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = costs.len();
        LpProblem { costs, c, g, c_eq: DMatrix::zeros(0, n), g_eq: DVector::zeros(0) }
    }

    pub fn with_equalities(mut self, c_eq: DMatrix<f64>, g_eq: DVector<f64>) -> Self {
        self.c_eq = c_eq;
        self.g_eq = g_eq;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.costs.len()
    }

    fn check_shapes(&self) -> bool {
        let n = self.costs.len();
        self.c.ncols() == n
            && self.c.nrows() == self.g.len()
            && self.c_eq.ncols() == n
            && self.c_eq.nrows() == self.g_eq.len()
    }

    /// Largest violation of the constraints at `z` (including `z ≥ 0`).
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        let ub = (&self.c * z - &self.g).iter().fold(0.0f64, |a, &v| a.max(v));
        let eq = (&self.c_eq * z - &self.g_eq).amax();
        let neg = z.iter().fold(0.0f64, |a, &v| a.max(-v));
        ub.max(eq).max(neg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub z: DVector<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpConfig {
    /// Primal and dual residual tolerance, relative to `1 + ‖rhs‖∞`.
    pub feas_tol: f64,
    /// Duality gap tolerance, relative to `1 + |objective|`.
    pub opt_tol: f64,
    pub max_iter: usize,
}

impl Default for LpConfig {
    fn default() -> Self {
        LpConfig { feas_tol: 1e-8, opt_tol: 1e-8, max_iter: 200 }
    }
}

/// Anything that can solve an [`LpProblem`].
pub trait LpSolver: Sync {
    fn solve(&self, lp: &LpProblem) -> LpSolution;
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InteriorPoint {
    pub config: LpConfig,
}

impl InteriorPoint {
    pub fn new(config: LpConfig) -> Self {
        InteriorPoint { config }
    }
}

impl LpSolver for InteriorPoint {
    fn solve(&self, lp: &LpProblem) -> LpSolution {
        solve_with(lp, &self.config)
    }
}

/// Solves `lp` with the interior-point kernel.
pub fn solve_lp(lp: &LpProblem, feas_tol: f64, opt_tol: f64, max_iter: usize) -> LpSolution {
    solve_with(lp, &LpConfig { feas_tol, opt_tol, max_iter })
}

fn solve_with(lp: &LpProblem, cfg: &LpConfig) -> LpSolution {
    let n = lp.num_vars();
    assert!(lp.check_shapes(), "inconsistent LP dimensions");
    if lp.c.nrows() + lp.c_eq.nrows() == 0 {
        // only z ≥ 0 remains
        return if lp.costs.iter().all(|&c| c >= 0.0) {
            LpSolution { z: DVector::zeros(n), objective: 0.0, status: LpStatus::Optimal, iterations: 0 }
        } else {
            LpSolution { z: DVector::zeros(n), objective: f64::NEG_INFINITY, status: LpStatus::Unbounded, iterations: 0 }
        };
    }

    let form = StdForm::new(lp);
    let run = form.ipm(cfg);
    if run.outcome == Outcome::Converged {
        let z = run.x.rows(0, n).map(|v| v.max(0.0));
        let objective = lp.costs.dot(&z);
        return LpSolution { z, objective, status: LpStatus::Optimal, iterations: run.iterations };
    }

    let status = match phase_one(lp, cfg) {
        Some(false) => LpStatus::Infeasible,
        _ if run.outcome == Outcome::PrimalBlowup => LpStatus::Unbounded,
        _ => LpStatus::MaxIterations,
    };
    LpSolution {
        z: DVector::zeros(n),
        objective: f64::NAN,
        status,
        iterations: run.iterations,
    }
}

/// `Some(true)` when the constraint set is nonempty, `Some(false)` when it
/// is empty, `None` when the auxiliary problem itself failed.
fn phase_one(lp: &LpProblem, cfg: &LpConfig) -> Option<bool> {
    let n = lp.num_vars();
    let (p_ub, p_eq) = (lp.c.nrows(), lp.c_eq.nrows());
    // variables: z, t, r+ (p_eq), r- (p_eq)
    let nv = n + 1 + 2 * p_eq;
    let mut c = DMatrix::zeros(p_ub, nv);
    c.view_mut((0, 0), (p_ub, n)).copy_from(&lp.c);
    c.column_mut(n).fill(-1.0);
    let mut c_eq = DMatrix::zeros(p_eq, nv);
    c_eq.view_mut((0, 0), (p_eq, n)).copy_from(&lp.c_eq);
    for i in 0..p_eq {
        c_eq[(i, n + 1 + i)] = 1.0;
        c_eq[(i, n + 1 + p_eq + i)] = -1.0;
    }
    let mut costs = DVector::zeros(nv);
    costs.rows_mut(n, nv - n).fill(1.0);
    let aux = LpProblem { costs, c, g: lp.g.clone(), c_eq, g_eq: lp.g_eq.clone() };

    let aux_cfg = LpConfig { max_iter: cfg.max_iter.max(100), ..*cfg };
    let run = StdForm::new(&aux).ipm(&aux_cfg);
    if run.outcome != Outcome::Converged {
        return None;
    }
    let z = run.x.rows(0, n).map(|v| v.max(0.0));
    let scale = 1.0 + lp.g.amax().max(lp.g_eq.amax());
    Some(lp.max_violation(&z) <= 10.0 * cfg.feas_tol * scale)
}

const REFINE_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Converged,
    MaxIter,
    Stalled,
    DualBlowup,
    PrimalBlowup,
    Numerical,
}

struct IpmRun {
    x: DVector<f64>,
    outcome: Outcome,
    iterations: usize,
}

/// `min cᵀx s.t. A x = b, x ≥ 0` with `A = [K  E]`, `E = [I; 0]` covering
/// the inequality rows and `x = (z, w)`.
struct StdForm<'a> {
    k: &'a DMatrix<f64>,
    kt: DMatrix<f64>,
    n: usize,
    p_ub: usize,
    b: DVector<f64>,
    cost: DVector<f64>,
    stacked: Option<DMatrix<f64>>,
}

impl<'a> StdForm<'a> {
    fn new(lp: &'a LpProblem) -> StdForm<'a> {
        let n = lp.num_vars();
        let (p_ub, p_eq) = (lp.c.nrows(), lp.c_eq.nrows());
        let stacked = if p_eq > 0 {
            let mut k = DMatrix::zeros(p_ub + p_eq, n);
            k.view_mut((0, 0), (p_ub, n)).copy_from(&lp.c);
            k.view_mut((p_ub, 0), (p_eq, n)).copy_from(&lp.c_eq);
            Some(k)
        } else {
            None
        };
        let mut b = DVector::zeros(p_ub + p_eq);
        b.rows_mut(0, p_ub).copy_from(&lp.g);
        b.rows_mut(p_ub, p_eq).copy_from(&lp.g_eq);
        let mut cost = DVector::zeros(n + p_ub);
        cost.rows_mut(0, n).copy_from(&lp.costs);
        let mut form = StdForm { k: &lp.c, kt: DMatrix::zeros(0, 0), n, p_ub, b, cost, stacked };
        form.kt = form.kmat().transpose();
        form
    }

    fn kmat(&self) -> &DMatrix<f64> {
        self.stacked.as_ref().unwrap_or(self.k)
    }

    fn vars(&self) -> usize {
        self.n + self.p_ub
    }

    fn a_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = self.kmat() * x.rows(0, self.n);
        for i in 0..self.p_ub {
            out[i] += x[self.n + i];
        }
        out
    }

    fn at_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.vars());
        out.rows_mut(0, self.n).copy_from(&(&self.kt * y));
        out.rows_mut(self.n, self.p_ub).copy_from(&y.rows(0, self.p_ub));
        out
    }

    /// Cholesky factor of `A diag(d) Aᵀ`, regularized when needed.
    fn normal_factor(&self, d: &DVector<f64>) -> Option<Cholesky<f64, Dyn>> {
        let mut scaled = self.kt.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= d[i].sqrt();
        }
        let mut m = scaled.tr_mul(&scaled);
        for i in 0..self.p_ub {
            m[(i, i)] += d[self.n + i];
        }
        let diag_max = m.diagonal().amax().max(1e-300);
        let mut reg = 0.0;
        for _ in 0..8 {
            let mut mm = m.clone();
            if reg > 0.0 {
                for i in 0..mm.nrows() {
                    mm[(i, i)] += reg;
                }
            }
            if let Some(ch) = Cholesky::new(mm) {
                return Some(ch);
            }
            reg = if reg == 0.0 { 1e-14 * diag_max } else { reg * 100.0 };
        }
        None
    }

    fn starting_point(&self) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let ones = DVector::from_element(self.vars(), 1.0);
        let ch = self.normal_factor(&ones)?;
        let mut x = self.at_mul(&ch.solve(&self.b));
        let y = ch.solve(&self.a_mul(&self.cost));
        let mut s = &self.cost - self.at_mul(&y);
        let dx = (-1.5 * x.min()).max(0.0);
        let ds = (-1.5 * s.min()).max(0.0);
        x.add_scalar_mut(dx);
        s.add_scalar_mut(ds);
        let xs = x.dot(&s);
        let (sx, ss) = (x.sum(), s.sum());
        if xs > 0.0 && sx > 0.0 && ss > 0.0 {
            x.add_scalar_mut(0.5 * xs / ss);
            s.add_scalar_mut(0.5 * xs / sx);
        }
        let floor = 1e-2 * (1.0 + self.b.amax().max(self.cost.amax()));
        x.apply(|v| *v = v.max(floor));
        s.apply(|v| *v = v.max(floor));
        Some((x, y, s))
    }

    fn ipm(&self, cfg: &LpConfig) -> IpmRun {
        let nv = self.vars();
        let Some((mut x, mut y, mut s)) = self.starting_point() else {
            return IpmRun { x: DVector::zeros(nv), outcome: Outcome::Numerical, iterations: 0 };
        };
        let b_scale = 1.0 + self.b.amax();
        let c_scale = 1.0 + self.cost.amax();
        let mut stalls = 0;

        for iter in 0..cfg.max_iter {
            let rp = &self.b - self.a_mul(&x);
            let rd = &self.cost - self.at_mul(&y) - &s;
            let mu = x.dot(&s) / nv as f64;
            let pobj = self.cost.dot(&x);
            let dobj = self.b.dot(&y);

            if rp.amax() <= cfg.feas_tol * b_scale
                && rd.amax() <= cfg.feas_tol * c_scale
                && (pobj - dobj).abs() <= cfg.opt_tol * (1.0 + pobj.abs())
            {
                return IpmRun { x, outcome: Outcome::Converged, iterations: iter };
            }
            if y.amax() > 1e10 * c_scale * b_scale {
                return IpmRun { x, outcome: Outcome::DualBlowup, iterations: iter };
            }
            if x.amax() > 1e10 * c_scale * b_scale {
                return IpmRun { x, outcome: Outcome::PrimalBlowup, iterations: iter };
            }

            let d = x.component_div(&s);
            let Some(ch) = self.normal_factor(&d) else {
                return IpmRun { x, outcome: Outcome::Numerical, iterations: iter };
            };

            // Newton system `A dx = ep, Aᵀdy + ds = ed, S dx + X ds = ec`
            let reduced = |ep: &DVector<f64>, ed: &DVector<f64>, ec: &DVector<f64>| {
                let ec_s = ec.component_div(&s);
                let rhs = ep + self.a_mul(&d.component_mul(ed)) - self.a_mul(&ec_s);
                let dy = ch.solve(&rhs);
                let atdy = self.at_mul(&dy);
                let dx = d.component_mul(&(&atdy - ed)) + ec_s;
                let ds = ed - atdy;
                (dx, dy, ds)
            };
            // the normal matrix loses accuracy as iterates approach the
            // boundary, so the step is refined against the full system
            let solve = |rc: &DVector<f64>| {
                let (mut dx, mut dy, mut ds) = reduced(&rp, &rd, rc);
                for _ in 0..REFINE_STEPS {
                    let ep = &rp - self.a_mul(&dx);
                    let ed = &rd - self.at_mul(&dy) - &ds;
                    let ec = rc - s.component_mul(&dx) - x.component_mul(&ds);
                    if ep.amax() <= 1e-3 * cfg.feas_tol * b_scale && ed.amax() <= 1e-3 * cfg.feas_tol * c_scale {
                        break;
                    }
                    let (cx, cy, cs) = reduced(&ep, &ed, &ec);
                    dx += cx;
                    dy += cy;
                    ds += cs;
                }
                (dx, dy, ds)
            };

            // predictor
            let rc_aff = -x.component_mul(&s);
            let (dx_a, _, ds_a) = solve(&rc_aff);
            let ap = max_step(&x, &dx_a).min(1.0);
            let ad = max_step(&s, &ds_a).min(1.0);
            let mu_aff = (&x + &dx_a * ap).dot(&(&s + &ds_a * ad)) / nv as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector
            let rc = DVector::from_element(nv, sigma * mu) - x.component_mul(&s) - dx_a.component_mul(&ds_a);
            let (dx, dy, ds) = solve(&rc);
            if dx.iter().chain(dy.iter()).chain(ds.iter()).any(|v| !v.is_finite()) {
                return IpmRun { x, outcome: Outcome::Numerical, iterations: iter };
            }
            let eta = (1.0 - mu).clamp(0.9, 0.995);
            let ap = (eta * max_step(&x, &dx)).min(1.0);
            let ad = (eta * max_step(&s, &ds)).min(1.0);

            if ap < 1e-10 && ad < 1e-10 {
                stalls += 1;
                if stalls >= 3 {
                    return IpmRun { x, outcome: Outcome::Stalled, iterations: iter };
                }
            } else {
                stalls = 0;
            }

            x += dx * ap;
            y += dy * ad;
            s += ds * ad;
        }
        IpmRun { x, outcome: Outcome::MaxIter, iterations: cfg.max_iter }
    }
}

/// Largest `α` keeping `v + α dv ≥ 0`; infinite when `dv ≥ 0`.
fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

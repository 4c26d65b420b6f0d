//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use eiv_sparse::{DenseMatrix, PerturbedProblem, TikhonovConfig};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

pub fn problem(a: &DMatrix<f64>, y: &DVector<f64>, bound_a: f64, bound_y: f64) -> PerturbedProblem {
    PerturbedProblem::new(DenseMatrix::new(a.clone()).unwrap(), y.clone(), bound_a, bound_y).unwrap()
}

/// Result of exhaustive vertex enumeration. `None` means no vertex is
/// feasible, which for a pointed polyhedron means the LP is infeasible.
pub struct VertexOptimum {
    pub objective: f64,
    pub z: DVector<f64>,
}

/// `min costsᵀz s.t. Cz ≤ g, z ≥ 0` by enumerating every basic solution.
/// Requires `costs > 0` so that a feasible problem attains its optimum at a vertex.
pub fn vertex_enumeration(costs: &DVector<f64>, c: &DMatrix<f64>, g: &DVector<f64>) -> Option<VertexOptimum> {
    let n = costs.len();
    let p = c.nrows();
    let rows = p + n;
    let row = |r: usize| -> (Vec<f64>, f64) {
        if r < p {
            ((0..n).map(|j| c[(r, j)]).collect(), g[r])
        } else {
            ((0..n).map(|j| if j == r - p { -1.0 } else { 0.0 }).collect(), 0.0)
        }
    };
    let scale = 1.0 + g.amax();
    let tol = 1e-9 * scale;
    let mut best: Option<VertexOptimum> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let mut m = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (k, &r) in idx.iter().enumerate() {
            let (coef, rhs) = row(r);
            for j in 0..n {
                m[(k, j)] = coef[j];
            }
            b[k] = rhs;
        }
        let svd = m.clone().svd(false, false);
        let smin = svd.singular_values.min();
        if smin > 1e-10 * svd.singular_values.max() {
            if let Some(z) = m.lu().solve(&b) {
                let feasible = (0..rows).all(|r| {
                    let (coef, rhs) = row(r);
                    coef.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>() <= rhs + tol
                });
                if feasible {
                    let obj = costs.dot(&z);
                    if best.as_ref().is_none_or(|v| obj < v.objective) {
                        best = Some(VertexOptimum { objective: obj, z });
                    }
                }
            }
        }
        // next combination in lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < rows - n + i {
                idx[i] += 1;
                for j in i + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Moore–Penrose pseudoinverse through the SVD.
pub fn pseudoinverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().pseudo_inverse(1e-12).unwrap()
}

/// Cyclic coordinate descent for `‖Ax − y‖₂² + λ‖x‖₁`.
pub fn lasso_coordinate_descent(a: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, sweeps: usize) -> DVector<f64> {
    let n = a.ncols();
    let mut x: DVector<f64> = DVector::zeros(n);
    let mut r = y.clone();
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm_squared()).collect();
    for _ in 0..sweeps {
        for j in 0..n {
            if norms[j] == 0.0 {
                continue;
            }
            let col = a.column(j);
            let rho: f64 = col.dot(&r) + norms[j] * x[j];
            let new = rho.signum() * (rho.abs() - lambda / 2.0).max(0.0) / norms[j];
            let step = new - x[j];
            if step != 0.0 {
                r.axpy(-step, &col, 1.0);
                x[j] = new;
            }
        }
    }
    x
}

pub fn lasso_objective(a: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, x: &DVector<f64>) -> f64 {
    (a * x - y).norm_squared() + lambda * x.lp_norm(1)
}

/// Outcome of one randomized probe of a sufficient condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Implication {
    pub condition: bool,
    pub conclusion: bool,
}

/// Sign-stage probe: Gaussian instance with random shape, sparsity,
/// magnitude range and perturbation level.
pub fn sign_stage_probe(seed: u64) -> Implication {
    use eiv_sparse::analysis::{theorem1_check, CrossTerm, NoiseTerm};
    use eiv_sparse::datagen::{gen_gaussian, perturb, GaussianSpec, PerturbSpec};
    let mut r = rng(seed);
    let n = r.random_range(20..=40);
    let m = r.random_range(8..n);
    let k = r.random_range(1..=6.min(m));
    let c = r.random_range(0.05..0.6);
    let delta = 10f64.powf(r.random_range(-5.0..-1.5));
    let gt = gen_gaussian(&GaussianSpec::new(n, m, k, c, 1.0, r.random())).unwrap();
    let (gt, p) = perturb(&gt, &PerturbSpec { bound_a: delta, bound_y: delta, seed: r.random() }).unwrap();
    let report = theorem1_check(&gt, &p, CrossTerm::AbsoluteSum, NoiseTerm::Componentwise).unwrap();
    let s = eiv_sparse::estimate_signs(&p, &TikhonovConfig::default()).unwrap();
    Implication { condition: report.holds, conclusion: s.matches_on(gt.x_true.as_slice(), &gt.support) }
}

/// ℓ1-stage probe with the true signs supplied. The observed matrix is drawn
/// with unit columns, as the guarantee assumes, and the clean matrix is
/// recovered as `A = Ā − δ_A`.
/// Outcome of one sign-informed LP probe under both sufficient conditions.
pub struct L1Probe {
    pub gamma_condition: bool,
    pub coherence_condition: bool,
    pub recovered: bool,
}

pub fn l1_stage_probe(seed: u64) -> L1Probe {
    use eiv_sparse::analysis::{coherence_on, cross_coherence, gamma, phi, remark3_check, theorem2_check};
    use eiv_sparse::datagen::sparse_vector_with;
    let mut r = rng(seed);
    let n = r.random_range(30..=80);
    let m = r.random_range(n / 2..n);
    let k = r.random_range(1..=3);
    let (c, d) = (r.random_range(0.2..0.5), 1.0);
    let delta = 10f64.powf(r.random_range(-5.0..-2.0));
    let mut a_bar = gaussian_matrix(&mut r, m, n);
    for mut col in a_bar.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    let (x, support) = sparse_vector_with(&mut r, n, k, c, d).unwrap();
    let da = DMatrix::from_fn(m, n, |_, _| r.random_range(-delta..=delta));
    let dy = DVector::from_fn(m, |_, _| r.random_range(-delta..=delta));
    let y_bar = (&a_bar - &da) * &x + dy;
    let p = problem(&a_bar, &y_bar, delta, delta);
    let tau = c / 2.0;
    let am = DenseMatrix::new(a_bar).unwrap();
    let phi = phi(m, delta, delta, k, k, d);
    let (gamma_condition, _) = theorem2_check(gamma(&am, &support), phi, k, tau);
    let complement = (0..n).filter(|j| !support.contains(j)).collect();
    let mu_s = coherence_on(&am, &support).unwrap();
    let mu_sc = cross_coherence(&am, &support, &complement).unwrap();
    let (coherence_condition, _) = remark3_check(mu_s, mu_sc, k, phi, tau);
    let solver = eiv_sparse::InteriorPoint::default();
    let (res, _) = eiv_sparse::recover_with_signs(&p, &eiv_sparse::generalized_sign(x.as_slice()), tau, &solver).unwrap();
    L1Probe { gamma_condition, coherence_condition, recovered: res.support_estimate == support }
}

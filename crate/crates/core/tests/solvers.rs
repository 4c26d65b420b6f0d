mod common;

use common::*;
use eiv_sparse::baselines::{basis_pursuit, bpdn_inf, lasso, orthant_oracle};
use eiv_sparse::sign_stage::Lambda;
use eiv_sparse::{
    build_lp, generalized_sign, recover_with_signs, solve_lp, tikhonov_estimate, InteriorPoint, LpConfig, LpStatus,
    SignVector, TikhonovConfig,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn random_lp<R: Rng>(rng: &mut R) -> (DVector<f64>, DMatrix<f64>, DVector<f64>) {
    let n = rng.random_range(1..=8);
    let p = rng.random_range(1..=12);
    let costs = DVector::from_fn(n, |_, _| rng.random_range(0.1..2.0));
    let c = gaussian_matrix(rng, p, n);
    let shift = rng.random_range(-1.0..1.5);
    let g = gaussian_vector(rng, p).add_scalar(shift);
    (costs, c, g)
}

#[test]
fn interior_point_matches_vertex_enumeration() {
    let mut rng = rng(11);
    let (mut feasible, mut infeasible) = (0, 0);
    for case in 0..150 {
        let (costs, c, g) = random_lp(&mut rng);
        let lp = eiv_sparse::LpProblem::inequality(costs.clone(), c.clone(), g.clone());
        let sol = solve_lp(&lp, 1e-8, 1e-8, 200);
        match vertex_enumeration(&costs, &c, &g) {
            Some(v) => {
                feasible += 1;
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
                assert!((sol.objective - v.objective).abs() <= 1e-6 * (1.0 + v.objective.abs()), "case {case}");
            }
            None => {
                infeasible += 1;
                assert_eq!(sol.status, LpStatus::Infeasible, "case {case}");
            }
        }
    }
    assert!(feasible > 20 && infeasible > 20, "{feasible} feasible, {infeasible} infeasible");
}

#[test]
fn relaxation_contains_every_consistent_vector() {
    let mut rng = rng(12);
    for _ in 0..200 {
        let (m, n) = (rng.random_range(2..8), rng.random_range(3..12));
        let a_bar = gaussian_matrix(&mut rng, m, n);
        let (ba, by) = (rng.random_range(0.0..0.3), rng.random_range(0.0..0.3));
        let x = gaussian_vector(&mut rng, n);
        let da = DMatrix::from_fn(m, n, |_, _| rng.random_range(-ba..=ba));
        let dy = DVector::from_fn(m, |_, _| rng.random_range(-by..=by));
        let y_bar = (&a_bar - &da) * &x + dy;
        let p = problem(&a_bar, &y_bar, ba, by);
        let lp = build_lp(&p, &generalized_sign(x.as_slice())).unwrap();
        assert!(lp.max_violation(&x.abs()) <= 1e-12, "violation {}", lp.max_violation(&x.abs()));
    }
}

#[test]
fn optimum_never_exceeds_the_true_l1_norm() {
    let mut rng = rng(14);
    let solver = InteriorPoint::default();
    for _ in 0..60 {
        let (m, n) = (rng.random_range(3..10), rng.random_range(4..16));
        let a_bar = gaussian_matrix(&mut rng, m, n);
        let (ba, by) = (rng.random_range(0.0..0.1), rng.random_range(0.0..0.1));
        let x = DVector::from_fn(n, |_, _| if rng.random_bool(0.4) { rng.random_range(-2.0..2.0) } else { 0.0 });
        let da = DMatrix::from_fn(m, n, |_, _| rng.random_range(-ba..=ba));
        let dy = DVector::from_fn(m, |_, _| rng.random_range(-by..=by));
        let y_bar = (&a_bar - &da) * &x + dy;
        let p = problem(&a_bar, &y_bar, ba, by);
        let (_, sol) = recover_with_signs(&p, &generalized_sign(x.as_slice()), 0.1, &solver).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective <= x.lp_norm(1) + 1e-7 * (1.0 + x.lp_norm(1)), "{} > {}", sol.objective, x.lp_norm(1));
    }
}

#[test]
fn larger_bounds_never_raise_the_optimum() {
    let mut rng = rng(13);
    let solver = InteriorPoint::default();
    for _ in 0..30 {
        let (m, n) = (rng.random_range(3..8), rng.random_range(6..14));
        let a_bar = gaussian_matrix(&mut rng, m, n);
        let x = DVector::from_fn(n, |i, _| if i < 2 { 1.0 } else { 0.0 });
        let y_bar = &a_bar * &x;
        let s = generalized_sign(x.as_slice());
        let mut last = f64::INFINITY;
        for scale in [0.0, 0.01, 0.05, 0.1, 0.3] {
            let p = problem(&a_bar, &y_bar, scale, scale * 2.0);
            let (_, sol) = recover_with_signs(&p, &s, 0.5, &solver).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!(sol.objective <= last + 1e-7, "{} > {last}", sol.objective);
            last = sol.objective;
        }
    }
}

#[test]
fn basis_pursuit_matches_exhaustive_orthant_search() {
    let mut rng = rng(14);
    let cfg = LpConfig::default();
    for _ in 0..20 {
        let a_bar = gaussian_matrix(&mut rng, 4, 8);
        let y_bar = gaussian_vector(&mut rng, 4);
        let x = basis_pursuit(&eiv_sparse::DenseMatrix::new(a_bar.clone()).unwrap(), &y_bar, &cfg).unwrap();
        assert!((&a_bar * &x - &y_bar).amax() <= 1e-6);
        let oracle = orthant_oracle(&problem(&a_bar, &y_bar, 0.0, 0.0), 0.1, &cfg).unwrap();
        assert!((x.lp_norm(1) - oracle.objective).abs() <= 1e-6, "{} vs {}", x.lp_norm(1), oracle.objective);
    }
}

#[test]
fn orthant_oracle_is_no_worse_than_any_single_pattern() {
    let mut rng = rng(15);
    let solver = InteriorPoint::default();
    for _ in 0..10 {
        let a_bar = gaussian_matrix(&mut rng, 3, 6);
        let y_bar = gaussian_vector(&mut rng, 3);
        let p = problem(&a_bar, &y_bar, 0.05, 0.05);
        let oracle = orthant_oracle(&p, 0.1, &LpConfig::default()).unwrap();
        let estimated = eiv_sparse::l2l1_recover(&p, &eiv_sparse::RecoveryConfig::with_tau(0.1)).unwrap();
        assert!(oracle.objective <= estimated.objective + 1e-7);
        for index in 0..64u64 {
            let (r, sol) = recover_with_signs(&p, &SignVector::from_index(6, index), 0.1, &solver).unwrap();
            if sol.status == LpStatus::Optimal {
                assert!(oracle.objective <= r.objective + 1e-7);
            }
        }
    }
}

#[test]
fn bpdn_objective_is_non_increasing_in_eta() {
    let mut rng = rng(16);
    let cfg = LpConfig::default();
    for _ in 0..10 {
        let a_bar = eiv_sparse::DenseMatrix::new(gaussian_matrix(&mut rng, 6, 15)).unwrap();
        let y_bar = gaussian_vector(&mut rng, 6);
        let mut last = f64::INFINITY;
        for eta in [0.0, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0] {
            let obj = bpdn_inf(&a_bar, &y_bar, eta, &cfg).unwrap().lp_norm(1);
            assert!(obj <= last + 1e-7, "eta {eta}: {obj} > {last}");
            last = obj;
        }
        assert!(last <= 1e-6, "eta beyond ‖ȳ‖∞ admits zero");
    }
}

#[test]
fn lasso_matches_coordinate_descent() {
    let mut rng = rng(17);
    for _ in 0..10 {
        let a = gaussian_matrix(&mut rng, 8, 12);
        let y = gaussian_vector(&mut rng, 8);
        let lambda = rng.random_range(0.1..2.0);
        let out = lasso(&eiv_sparse::DenseMatrix::new(a.clone()).unwrap(), &y, lambda, 200_000, 1e-13).unwrap();
        let reference = lasso_coordinate_descent(&a, &y, lambda, 20_000);
        let (f, f_ref) = (lasso_objective(&a, &y, lambda, &out.x), lasso_objective(&a, &y, lambda, &reference));
        assert!((f - f_ref).abs() <= 1e-6, "{f} vs {f_ref}");
        assert!(out.objectives.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}

#[test]
fn tikhonov_approaches_minimum_norm_solution() {
    let mut rng = rng(18);
    for _ in 0..20 {
        let a = gaussian_matrix(&mut rng, 5, 12);
        let y = gaussian_vector(&mut rng, 5);
        let p = problem(&a, &y, 0.0, 0.0);
        let x = tikhonov_estimate(&p, &TikhonovConfig::absolute(1e-8)).unwrap();
        assert!((&a * &x - &y).norm() <= 1e-5);
        assert!((&x - pseudoinverse(&a) * &y).amax() <= 1e-6);
    }
}

#[test]
fn tikhonov_agrees_with_normal_equation_form() {
    let mut rng = rng(19);
    for _ in 0..20 {
        let a = gaussian_matrix(&mut rng, 6, 10);
        let y = gaussian_vector(&mut rng, 6);
        let p = problem(&a, &y, 0.0, 0.0);
        let lambda = rng.random_range(1e-3..0.5);
        let x = tikhonov_estimate(&p, &TikhonovConfig { lambda: Lambda::Absolute(lambda) });
        let Ok(x) = x else { continue };
        let big = a.tr_mul(&a) + DMatrix::identity(10, 10) * lambda;
        let reference = big.lu().solve(&a.tr_mul(&y)).unwrap();
        assert!((&x - reference).amax() <= 1e-9 * (1.0 + x.amax()));
    }
}

#[test]
fn tikhonov_norm_shrinks_with_lambda() {
    let mut rng = rng(20);
    let a = gaussian_matrix(&mut rng, 8, 20) * 3.0;
    let y = gaussian_vector(&mut rng, 8);
    let p = problem(&a, &y, 0.0, 0.0);
    let mut last = f64::INFINITY;
    for lambda in [1e-8, 1e-4, 1e-2, 0.1, 0.5] {
        let norm = tikhonov_estimate(&p, &TikhonovConfig::absolute(lambda)).unwrap().norm();
        assert!(norm < last);
        last = norm;
    }
}

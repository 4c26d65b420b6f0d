mod common;

use common::*;
use eiv_sparse::analysis::{coherence_on, gamma, lemma1_check, phi, tight_frame};
use eiv_sparse::datagen::{gen_arx, gen_gaussian, gen_sparse_vector, perturb, snr_db, ArxSpec, GaussianSpec, PerturbSpec};
use eiv_sparse::{DenseMatrix, Support};
use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;

#[test]
fn sign_stage_condition_implies_correct_signs() {
    let mut covered = 0;
    for seed in 0..300 {
        let probe = sign_stage_probe(seed);
        assert!(!probe.condition || probe.conclusion, "seed {seed}: condition held but signs are wrong");
        covered += probe.condition as usize;
    }
    assert!(covered > 50, "condition held on only {covered} probes");
}

#[test]
fn l1_stage_condition_implies_exact_support() {
    let mut covered = 0;
    for seed in 0..300 {
        let probe = l1_stage_probe(seed);
        assert!(!probe.gamma_condition || probe.recovered, "seed {seed}: condition held but support is wrong");
        covered += probe.gamma_condition as usize;
    }
    assert!(covered > 50, "condition held on only {covered} probes");
}

#[test]
fn coherence_condition_implies_exact_support() {
    let mut covered = 0;
    for seed in 0..300 {
        let probe = l1_stage_probe(seed);
        assert!(!probe.coherence_condition || probe.recovered, "seed {seed}: condition held but support is wrong");
        covered += probe.coherence_condition as usize;
    }
    assert!(covered > 20, "condition held on only {covered} probes");
}

#[test]
fn frame_inner_products_are_bounded_by_support_coherence() {
    let mut r = rng(32);
    for _ in 0..50 {
        let m = r.random_range(3..=15);
        let n = r.random_range(m + 1..=30);
        let a = DenseMatrix::new(gaussian_matrix(&mut r, m, n)).unwrap();
        let k = r.random_range(2..=m.min(6));
        let s: Support = sample(&mut r, n, k).into_iter().collect();
        let q = tight_frame(&a).unwrap();
        let mu = coherence_on(&q, &s).unwrap();
        for &i in &s {
            for &j in &s {
                if i == j {
                    continue;
                }
                let (qi, qj) = (q.as_matrix().column(i), q.as_matrix().column(j));
                assert!(qi.dot(&qj).abs() <= qi.norm() * qj.norm() * mu + 1e-12);
            }
        }
    }
}

#[test]
fn lemma1_identity_on_random_instances() {
    let mut r = rng(31);
    for _ in 0..100 {
        let m = r.random_range(2..=20);
        let n = r.random_range(m + 1..=40);
        let a = DenseMatrix::new(gaussian_matrix(&mut r, m, n)).unwrap();
        let k = r.random_range(1..=n);
        let s: Support = sample(&mut r, n, k).into_iter().collect();
        assert!(lemma1_check(&a, &s).unwrap() <= 1e-8);
        let full: Support = (0..n).collect();
        assert!(lemma1_check(&a, &full).unwrap() <= 1e-8);
    }
}

#[test]
fn tight_frame_has_orthonormal_rows() {
    let mut r = rng(32);
    let a = DenseMatrix::new(gaussian_matrix(&mut r, 12, 30)).unwrap();
    let q = tight_frame(&a).unwrap();
    let qqt = q.as_matrix() * q.as_matrix().transpose();
    assert!((qqt - DMatrix::<f64>::identity(12, 12)).amax() <= 1e-12);
}

#[test]
fn gamma_matches_direct_summation() {
    let mut r = rng(33);
    let a = gaussian_matrix(&mut r, 40, 100);
    let s: Support = sample(&mut r, 100, 10).into_iter().collect();
    let dot = |i: usize, j: usize| (0..40).map(|t| a[(t, i)] * a[(t, j)]).sum::<f64>().abs();
    let mut inner: f64 = 0.0;
    let mut outer: f64 = 0.0;
    for i in 0..100 {
        let sum: f64 = s.iter().filter(|&&l| l != i).map(|&l| dot(i, l)).sum();
        if s.contains(&i) {
            inner = inner.max(sum);
        } else {
            outer = outer.max(sum);
        }
    }
    let g = gamma(&DenseMatrix::new(a).unwrap(), &s);
    assert!(g.is_finite());
    assert!((g - (inner + outer)).abs() <= 1e-10 * (inner + outer));
}

#[test]
fn phi_is_monotone_in_every_argument() {
    let mut r = rng(34);
    for _ in 0..500 {
        let (m, k, kh) = (r.random_range(1..100), r.random_range(1..20), r.random_range(1..20));
        let (by, ba, d) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0), r.random_range(0.0..2.0));
        let base = phi(m, by, ba, k, kh, d);
        let e = r.random_range(0.0..0.5);
        assert!(phi(m + 1, by, ba, k, kh, d) >= base);
        assert!(phi(m, by + e, ba, k, kh, d) >= base);
        assert!(phi(m, by, ba + e, k, kh, d) >= base);
        assert!(phi(m, by, ba, k + 1, kh, d) >= base);
        assert!(phi(m, by, ba, k, kh + 1, d) >= base);
        assert!(phi(m, by, ba, k, kh, d + e) >= base);
    }
}

/// Two-sided Kolmogorov–Smirnov statistic against the uniform law on `[lo, hi]`.
fn ks_uniform(mut v: Vec<f64>, lo: f64, hi: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn magnitudes_are_uniform_on_the_stated_range() {
    let mut mags = Vec::new();
    for seed in 0..300 {
        let (x, s) = gen_sparse_vector(100, 10, 0.5, 1.0, seed).unwrap();
        mags.extend(s.iter().map(|&i| x[i].abs()));
    }
    let stat = ks_uniform(mags.clone(), 0.5, 1.0);
    let critical = 1.358 / (mags.len() as f64).sqrt();
    assert!(stat < critical, "KS statistic {stat} exceeds {critical}");
    // the same statistic detects a shifted law
    let shifted: Vec<f64> = mags.iter().map(|v| v * 0.9 + 0.05).collect();
    assert!(ks_uniform(shifted, 0.5, 1.0) > critical);
}

#[test]
fn generators_are_seed_deterministic() {
    let spec = GaussianSpec::new(30, 12, 4, 0.5, 1.0, 99);
    assert_eq!(gen_gaussian(&spec).unwrap(), gen_gaussian(&spec).unwrap());
    assert_ne!(gen_gaussian(&spec).unwrap().a, gen_gaussian(&GaussianSpec { seed: 100, ..spec }).unwrap().a);
    let arx = ArxSpec { m: 40, seed: 5, ..ArxSpec::default() };
    assert_eq!(gen_arx(&arx).unwrap(), gen_arx(&arx).unwrap());
}

#[test]
fn arx_regressor_reproduces_simulated_outputs() {
    for seed in 0..10 {
        let (gt, detail) = gen_arx(&ArxSpec { m: 60, seed, ..ArxSpec::default() }).unwrap();
        let predicted = gt.a.as_matrix() * &gt.x_true;
        assert!((predicted - &detail.outputs).amax() <= 1e-12 * (1.0 + detail.outputs.amax()));
        assert!(detail.spectral_radius < 0.99);
        // Toeplitz structure: each lagged column is the previous one shifted by a row
        let a = gt.a.as_matrix();
        for r in 1..60 {
            assert_eq!(a[(r, 1)], a[(r - 1, 0)]);
            assert_eq!(a[(r, 51)], a[(r - 1, 50)]);
        }
    }
}

#[test]
fn perturbation_respects_bounds_and_snr_law() {
    let gt = gen_gaussian(&GaussianSpec::new(50, 20, 5, 0.5, 1.0, 3)).unwrap();
    let (g1, p1) = perturb(&gt, &PerturbSpec { bound_a: 0.01, bound_y: 0.01, seed: 8 }).unwrap();
    let (g2, _) = perturb(&gt, &PerturbSpec { bound_a: 0.1, bound_y: 0.1, seed: 8 }).unwrap();
    assert!(g1.delta_a.amax() <= 0.01 && g1.delta_y.amax() <= 0.01);
    assert!((p1.a_bar.as_matrix() - gt.a.as_matrix() - g1.delta_a.as_matrix()).amax() <= 1e-15);
    let drop = snr_db(&g1).unwrap() - snr_db(&g2).unwrap();
    assert!((drop - 20.0).abs() <= 1e-9);
}

#[test]
fn gaussian_snr_mapping_at_largest_bound() {
    let mut total = 0.0;
    for seed in 0..20 {
        let gt = gen_gaussian(&GaussianSpec::new(100, 35, 10, 0.5, 1.0, seed)).unwrap();
        let (g, _) = perturb(&gt, &PerturbSpec { bound_a: 0.022, bound_y: 0.022, seed: seed + 1000 }).unwrap();
        total += snr_db(&g).unwrap();
    }
    let mean = total / 20.0;
    assert!((mean - 18.0).abs() <= 2.0, "mean SNR {mean}");
}

#[test]
fn success_rate_falls_as_perturbations_grow() {
    use eiv_sparse::harness::{run_experiment, ExperimentConfig, Method};
    let deltas = vec![1e-4, 3e-3, 1e-2, 3e-2, 1e-1];
    let cfg = ExperimentConfig {
        n: 40,
        k: 3,
        m_grid: vec![25],
        delta_grid: deltas.clone(),
        runs: 60,
        methods: vec![Method::L2l1],
        timing: false,
        seed: 8,
        ..ExperimentConfig::gaussian()
    };
    let report = run_experiment(&cfg).unwrap();
    let rates: Vec<f64> = deltas.iter().map(|&d| report.cell(Method::L2l1, 25, d).unwrap().success_rate).collect();
    // sampling noise allows small upticks between neighbouring cells
    for w in rates.windows(2) {
        assert!(w[1] <= w[0] + 0.1, "{rates:?}");
    }
    assert!(rates[0] > rates[rates.len() - 1] + 0.3, "{rates:?}");
}

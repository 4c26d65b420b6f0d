//! Instance generators: Gaussian static regression, SISO ARX identification,
//! bounded uniform perturbations and the measured SNR.
//!
//! Every generator takes an explicit seed and draws from ChaCha8, so
//! instances are bit-reproducible across platforms and thread counts.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{support_of, DenseMatrix, GroundTruth, PerturbedProblem, Support};

/// Default entry standard deviation of the Gaussian ensemble.
pub const DEFAULT_ENTRY_STD: f64 = 0.1;
/// Default standard deviation of the ARX input signal.
pub const DEFAULT_INPUT_STD: f64 = 0.1;
pub const DEFAULT_BURN_IN: usize = 200;
pub const DEFAULT_MAX_RETRIES: usize = 100;
/// Spectral radius the autoregressive part must stay below.
pub const STABILITY_RADIUS: f64 = 0.99;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic child seed: the first output of the ChaCha8 stream chosen
/// by `parts` under key `base`. Distinct `parts` give independent streams.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    let mut stream: u64 = 0;
    for &p in parts {
        stream = stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(p).rotate_left(17);
    }
    rng.set_stream(stream);
    rng.next_u64()
}

fn check_range(n: usize, k: usize, c: f64, d: f64) -> Result<()> {
    if k > n {
        return Err(Error::InvalidInput(format!("k = {k} exceeds n = {n}")));
    }
    if !(c > 0.0 && d >= c && d.is_finite()) {
        return Err(Error::InvalidInput(format!("need 0 < c <= d, got c = {c}, d = {d}")));
    }
    Ok(())
}

/// k-sparse vector with uniformly random support, magnitudes uniform on
/// `[c, d]` and equiprobable signs.
pub fn sparse_vector_with<R: Rng>(rng: &mut R, n: usize, k: usize, c: f64, d: f64) -> Result<(DVector<f64>, Support)> {
    check_range(n, k, c, d)?;
    let mut x = DVector::zeros(n);
    let mut idx = sample(rng, n, k).into_vec();
    idx.sort_unstable();
    for &i in &idx {
        let mag = if c == d { c } else { rng.random_range(c..=d) };
        x[i] = if rng.random_bool(0.5) { mag } else { -mag };
    }
    Ok((x, idx.into_iter().collect()))
}

pub fn gen_sparse_vector(n: usize, k: usize, c: f64, d: f64, seed: u64) -> Result<(DVector<f64>, Support)> {
    sparse_vector_with(&mut rng_from_seed(seed), n, k, c, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub c: f64,
    pub d: f64,
    pub entry_std: f64,
    pub seed: u64,
}

impl GaussianSpec {
    pub fn new(n: usize, m: usize, k: usize, c: f64, d: f64, seed: u64) -> Self {
        GaussianSpec { n, m, k, c, d, entry_std: DEFAULT_ENTRY_STD, seed }
    }
}

fn truth(a: DMatrix<f64>, x: DVector<f64>, c: f64, d: f64) -> Result<GroundTruth> {
    GroundTruth::noiseless(DenseMatrix::new(a)?, x, c, d)
}

/// Unperturbed Gaussian instance: `A` has i.i.d. `N(0, entry_std²)` entries.
pub fn gen_gaussian(spec: &GaussianSpec) -> Result<GroundTruth> {
    if spec.m == 0 || spec.n == 0 {
        return Err(Error::InvalidInput("m and n must be positive".into()));
    }
    let normal = Normal::new(0.0, spec.entry_std)
        .map_err(|_| Error::InvalidInput(format!("bad entry std {}", spec.entry_std)))?;
    let mut rng = rng_from_seed(spec.seed);
    let (x, _) = sparse_vector_with(&mut rng, spec.n, spec.k, spec.c, spec.d)?;
    // column-major fill order is part of the reproducibility contract
    let a = DMatrix::from_fn(spec.m, spec.n, |_, _| normal.sample(&mut rng));
    truth(a, x, spec.c, spec.d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArxSpec {
    /// Autoregressive order.
    pub na: usize,
    /// Exogenous order.
    pub nb: usize,
    pub m: usize,
    pub k: usize,
    pub c: f64,
    pub d: f64,
    pub input_std: f64,
    /// Standard deviation of the equation error `e_t`; zero gives a
    /// noise-free system.
    pub system_noise_std: f64,
    pub seed: u64,
    pub burn_in: usize,
    pub max_retries: usize,
}

impl Default for ArxSpec {
    fn default() -> Self {
        ArxSpec {
            na: 50,
            nb: 50,
            m: 50,
            k: 10,
            c: 0.2,
            d: 0.4,
            input_std: DEFAULT_INPUT_STD,
            system_noise_std: 0.0,
            seed: 0,
            burn_in: DEFAULT_BURN_IN,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }
}

/// Side information from an ARX draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ArxDetail {
    /// Rejected parameter draws before the accepted one.
    pub retries: usize,
    pub spectral_radius: f64,
    /// Simulated outputs aligned with the rows of the regressor.
    pub outputs: DVector<f64>,
}

/// Spectral radius of the companion matrix of `y_t = Σ a_p y_{t−p}`.
pub fn ar_spectral_radius(a: &[f64]) -> f64 {
    let na = a.len();
    if na == 0 || a.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let mut comp = DMatrix::zeros(na, na);
    for (p, &ap) in a.iter().enumerate() {
        comp[(0, p)] = ap;
    }
    for i in 1..na {
        comp[(i, i - 1)] = 1.0;
    }
    // an unconverged Schur iteration counts as unstable so the draw is rejected
    match comp.try_schur(f64::EPSILON, 10_000) {
        Some(schur) => schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max),
        None => f64::INFINITY,
    }
}

/// ARX instance: `y_{t+1} = Σ_{p=1}^{na} a_p y_{t+1−p} + Σ_{q=1}^{nb} b_q u_{t+1−q}`
/// `+ e_{t+1}` with Gaussian input, Gaussian equation error of standard
/// deviation `system_noise_std` and zero initial conditions.
///
/// The parameter vector is `θ = (a_1..a_na, b_1..b_nb)` and row `t` of the
/// regressor is `(y_t, …, y_{t−na+1}, u_t, …, u_{t−nb+1})` with target `y_{t+1}`.
/// Parameter draws whose autoregressive part is not safely stable are rejected.
/// The ground truth carries the clean regression `y = Aθ`; the simulated
/// outputs, equation error included, are returned in [`ArxDetail::outputs`].
pub fn gen_arx(spec: &ArxSpec) -> Result<(GroundTruth, ArxDetail)> {
    let n = spec.na + spec.nb;
    if spec.m == 0 || n == 0 {
        return Err(Error::InvalidInput("m and na + nb must be positive".into()));
    }
    let normal = Normal::new(0.0, spec.input_std)
        .map_err(|_| Error::InvalidInput(format!("bad input std {}", spec.input_std)))?;
    let mut rng = rng_from_seed(spec.seed);

    let mut retries = 0;
    let (theta, radius) = loop {
        let (theta, _) = sparse_vector_with(&mut rng, n, spec.k, spec.c, spec.d)?;
        let radius = ar_spectral_radius(&theta.as_slice()[..spec.na]);
        if radius < STABILITY_RADIUS {
            break (theta, radius);
        }
        if retries == spec.max_retries {
            return Err(Error::UnstableSystem(retries));
        }
        retries += 1;
    };

    let lag = spec.na.max(spec.nb);
    let t0 = spec.burn_in + lag;
    let len = t0 + spec.m + 1;
    let u: Vec<f64> = (0..len).map(|_| normal.sample(&mut rng)).collect();
    let e: Vec<f64> = if spec.system_noise_std > 0.0 {
        let err = Normal::new(0.0, spec.system_noise_std)
            .map_err(|_| Error::InvalidInput(format!("bad system noise std {}", spec.system_noise_std)))?;
        (0..len).map(|_| err.sample(&mut rng)).collect()
    } else {
        vec![0.0; len]
    };
    let mut y = vec![0.0; len];
    let (a_par, b_par) = theta.as_slice().split_at(spec.na);
    for t in 1..len {
        let mut acc = 0.0;
        for (p, &ap) in a_par.iter().enumerate() {
            if ap != 0.0 && t > p {
                acc += ap * y[t - 1 - p];
            }
        }
        for (q, &bq) in b_par.iter().enumerate() {
            if bq != 0.0 && t > q {
                acc += bq * u[t - 1 - q];
            }
        }
        y[t] = acc + e[t];
    }

    let mut a = DMatrix::zeros(spec.m, n);
    let mut outputs = DVector::zeros(spec.m);
    for r in 0..spec.m {
        let t = t0 + r;
        for p in 0..spec.na {
            a[(r, p)] = y[t - p];
        }
        for q in 0..spec.nb {
            a[(r, spec.na + q)] = u[t - q];
        }
        outputs[r] = y[t + 1];
    }
    let gt = truth(a, theta, spec.c, spec.d)?;
    Ok((gt, ArxDetail { retries, spectral_radius: radius, outputs }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbSpec {
    pub bound_a: f64,
    pub bound_y: f64,
    pub seed: u64,
}

/// Unit-box noise `(U_A, U_y)` with i.i.d. uniform entries on `[−1, 1]`.
/// Scaling by the bounds gives the perturbation, so one draw serves a whole
/// grid of bounds.
pub fn unit_noise(m: usize, n: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = rng_from_seed(seed);
    let ua = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..=1.0));
    let uy = DVector::from_fn(m, |_, _| rng.random_range(-1.0..=1.0));
    (ua, uy)
}

/// Adds `δ_A = Δ_A U_A` and `δ_y = Δ_y U_y` to the clean data.
pub fn perturb_with(gt: &GroundTruth, ua: &DMatrix<f64>, uy: &DVector<f64>, bound_a: f64, bound_y: f64) -> Result<(GroundTruth, PerturbedProblem)> {
    if ua.shape() != gt.a.shape() || uy.len() != gt.y.len() {
        return Err(Error::DimensionMismatch("noise does not match instance".into()));
    }
    let delta_a = ua * bound_a;
    let delta_y = uy * bound_y;
    let a_bar = DenseMatrix::new(gt.a.as_matrix() + &delta_a)?;
    let y_bar = &gt.y + &delta_y;
    let p = PerturbedProblem::new(a_bar, y_bar, bound_a, bound_y)?;
    let mut out = gt.clone();
    out.delta_a = DenseMatrix::new(delta_a)?;
    out.delta_y = delta_y;
    Ok((out, p))
}

/// I.i.d. uniform perturbation on `[−Δ, Δ]` entrywise.
pub fn perturb(gt: &GroundTruth, spec: &PerturbSpec) -> Result<(GroundTruth, PerturbedProblem)> {
    let (ua, uy) = unit_noise(gt.a.rows(), gt.a.cols(), spec.seed);
    perturb_with(gt, &ua, &uy, spec.bound_a, spec.bound_y)
}

/// `10 log₁₀((‖y‖² + ‖A‖_F²) / (‖δ_y‖² + ‖δ_A‖_F²))`.
pub fn snr_db(gt: &GroundTruth) -> Result<f64> {
    let signal = gt.y.norm_squared() + gt.a.norm_squared();
    let noise = gt.delta_y.norm_squared() + gt.delta_a.norm_squared();
    if noise == 0.0 {
        return Err(Error::InfiniteSnr);
    }
    Ok(10.0 * (signal / noise).log10())
}

/// Rebuilds a ground truth from user-supplied clean data.
pub fn ground_truth_from(a: DenseMatrix, x: DVector<f64>) -> Result<GroundTruth> {
    let s = support_of(x.as_slice());
    let c = s.iter().map(|&i| x[i].abs()).fold(f64::INFINITY, f64::min);
    let d = s.iter().map(|&i| x[i].abs()).fold(0.0, f64::max);
    GroundTruth::noiseless(a, x, c, d)
}

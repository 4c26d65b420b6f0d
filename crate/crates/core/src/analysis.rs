//! Diagnostics behind the recovery guarantees: coherence, the tight frame
//! spanning the row space of Ā, and evaluators for the sufficient
//! conditions of the sign stage and the ℓ1 stage.
//!
//! All evaluators are pure functions of their inputs. Conditions that need
//! the ground truth are diagnostic only.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::datagen::{self, ArxSpec, GaussianSpec};
use crate::error::{Error, Result};
use crate::linalg::{checked_cholesky, row_gram};
use crate::model::{normalize_columns, DenseMatrix, GroundTruth, PerturbedProblem, Support, ZERO_COLUMN_TOL};

/// Number of log-spaced values of ν scanned by [`remark3_check`].
pub const NU_GRID_POINTS: usize = 20;

fn column_norms(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    m.column_iter()
        .enumerate()
        .map(|(j, c)| {
            let n = c.norm();
            if n < ZERO_COLUMN_TOL {
                Err(Error::ZeroColumn(j))
            } else {
                Ok(n)
            }
        })
        .collect()
}

/// Largest normalized absolute inner product between two distinct columns.
pub fn coherence(m: &DenseMatrix) -> Result<f64> {
    if m.cols() < 2 {
        return Err(Error::InvalidInput("coherence needs at least two columns".into()));
    }
    let norms = column_norms(m)?;
    let gram = m.tr_mul(m.as_matrix());
    let mut mu: f64 = 0.0;
    for i in 0..m.cols() {
        for j in (i + 1)..m.cols() {
            mu = mu.max(gram[(i, j)].abs() / (norms[i] * norms[j]));
        }
    }
    Ok(mu.min(1.0))
}

/// Largest normalized absolute inner product between a column in `a` and
/// a column in `b` (index sets into the columns of `m`). Zero when either
/// set is empty.
pub fn cross_coherence(m: &DenseMatrix, a: &Support, b: &Support) -> Result<f64> {
    let norms = column_norms(m)?;
    let mut mu: f64 = 0.0;
    for &i in a {
        for &j in b {
            if i != j {
                mu = mu.max(m.column(i).dot(&m.column(j)).abs() / (norms[i] * norms[j]));
            }
        }
    }
    Ok(mu.min(1.0))
}

/// Coherence restricted to the columns in `s`; zero for fewer than two columns.
pub fn coherence_on(m: &DenseMatrix, s: &Support) -> Result<f64> {
    cross_coherence(m, s, s)
}

/// `Q = Uᵀ` from the thin SVD `Āᵀ = U Σ Vᵀ`: row-orthonormal with the row space of Ā.
pub fn tight_frame(a_bar: &DenseMatrix) -> Result<DenseMatrix> {
    let (m, n) = (a_bar.rows(), a_bar.cols());
    if m > n {
        return Err(Error::RankDeficient(f64::INFINITY));
    }
    let svd = a_bar.transpose().svd(true, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 0.0) || (smax / smin).powi(2) > crate::linalg::SINGULAR_CONDITION {
        return Err(Error::RankDeficient(if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY }));
    }
    let u = svd.u.expect("requested U");
    DenseMatrix::new(u.transpose())
}

/// `‖Ā_Sᵀ(ĀĀᵀ)⁻¹Ā_S − Q_SᵀQ_S‖∞` (largest entry in absolute value).
pub fn lemma1_check(a_bar: &DenseMatrix, s: &Support) -> Result<f64> {
    let q = tight_frame(a_bar)?;
    let cols: Vec<usize> = s.iter().copied().collect();
    if cols.iter().any(|&i| i >= a_bar.cols()) {
        return Err(Error::InvalidInput("support index out of range".into()));
    }
    if cols.is_empty() {
        return Ok(0.0);
    }
    let a_s = a_bar.select_columns(&cols);
    let chol = checked_cholesky(row_gram(a_bar.as_matrix()))?;
    let lhs = a_s.transpose() * chol.solve(&a_s);
    let q_s = q.select_columns(&cols);
    let rhs = q_s.transpose() * q_s;
    Ok((lhs - rhs).amax())
}

/// How the off-diagonal term of the sign-stage condition is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossTerm {
    /// `d Σ_{j∈S∖i} |Q_iᵀQ_j|`: a valid bound for every sign pattern.
    AbsoluteSum,
    /// `d |Σ_{j∈S∖i} Q_iᵀQ_j|`: the plain sum, not a bound in general.
    SignedSum,
}

/// Which size of `f(δ) = Āᵀ(ĀĀᵀ)⁻¹(δ_y − δ_A x̃)` enters the row-i inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseTerm {
    /// `|f(δ)_i|`.
    Componentwise,
    /// `‖f(δ)‖∞`.
    MaxNorm,
}

impl CrossTerm {
    pub fn as_str(self) -> &'static str {
        match self {
            CrossTerm::AbsoluteSum => "absolute_sum",
            CrossTerm::SignedSum => "signed_sum",
        }
    }
}

impl NoiseTerm {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseTerm::Componentwise => "componentwise",
            NoiseTerm::MaxNorm => "max_norm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Report {
    /// `(i, holds)` for every `i ∈ S`, in increasing order of `i`.
    pub per_index: Vec<(usize, bool)>,
    pub holds: bool,
    /// Slack `Q_iᵀQ_i c − lhs_i` for every `i ∈ S`.
    pub margins: Vec<f64>,
    pub f_delta: DVector<f64>,
    pub cross: CrossTerm,
    pub noise: NoiseTerm,
}

/// Evaluates the sign-stage sufficient condition
/// `d·cross_i + noise_i < Q_iᵀQ_i c` for every `i ∈ S`.
pub fn theorem1_check(gt: &GroundTruth, p: &PerturbedProblem, cross: CrossTerm, noise: NoiseTerm) -> Result<Theorem1Report> {
    let a = p.a_bar.as_matrix();
    if gt.x_true.len() != p.n() || gt.delta_a.shape() != a.shape() {
        return Err(Error::DimensionMismatch("ground truth and problem disagree".into()));
    }
    let q = tight_frame(&p.a_bar)?;
    let chol = checked_cholesky(row_gram(a))?;
    let r = &gt.delta_y - gt.delta_a.as_matrix() * &gt.x_true;
    let f_delta = a.transpose() * chol.solve(&r);
    let f_max = f_delta.amax();
    let qtq = q.tr_mul(q.as_matrix());

    let mut per_index = Vec::with_capacity(gt.k());
    let mut margins = Vec::with_capacity(gt.k());
    for &i in &gt.support {
        let others = gt.support.iter().filter(|&&j| j != i);
        let cross_term = match cross {
            CrossTerm::AbsoluteSum => others.map(|&j| qtq[(i, j)].abs()).sum::<f64>(),
            CrossTerm::SignedSum => others.map(|&j| qtq[(i, j)]).sum::<f64>().abs(),
        };
        let noise_term = match noise {
            NoiseTerm::Componentwise => f_delta[i].abs(),
            NoiseTerm::MaxNorm => f_max,
        };
        let margin = qtq[(i, i)] * gt.c - (gt.d * cross_term + noise_term);
        per_index.push((i, margin > 0.0));
        margins.push(margin);
    }
    let holds = per_index.iter().all(|&(_, h)| h);
    Ok(Theorem1Report { per_index, holds, margins, f_delta, cross, noise })
}

/// `max_{i∈S} Σ_{l∈S,l≠i} |M_iᵀM_l| + max_{j∉S} Σ_{l∈S} |M_jᵀM_l|` on the
/// columns as given. The guarantee it enters assumes unit columns.
pub fn gamma(m: &DenseMatrix, s: &Support) -> f64 {
    let (inner, outer) = gamma_terms(m, s);
    inner + outer
}

/// The two maxima of [`gamma`]: in-support and off-support.
pub fn gamma_terms(m: &DenseMatrix, s: &Support) -> (f64, f64) {
    let g = m.tr_mul(m.as_matrix());
    let inner = s
        .iter()
        .map(|&i| s.iter().filter(|&&l| l != i).map(|&l| g[(i, l)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let outer = (0..m.cols())
        .filter(|j| !s.contains(j))
        .map(|j| s.iter().map(|&l| g[(j, l)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    (inner, outer)
}

/// `√m (2Δ_y + Δ_A (k + k̂) d)`.
pub fn phi(m: usize, bound_y: f64, bound_a: f64, k: usize, k_hat: usize, d: f64) -> f64 {
    (m as f64).sqrt() * (2.0 * bound_y + bound_a * (k + k_hat) as f64 * d)
}

/// Whether some `ξ > 0` satisfies `φk ≤ τξ` and `γ ≤ 1 − 2ξ`; the witness
/// is the largest admissible value `ξ = (1 − γ)/2`.
pub fn theorem2_check(gamma: f64, phi: f64, k: usize, tau: f64) -> (bool, Option<f64>) {
    if !(gamma < 1.0) || !(tau > 0.0) {
        return (false, None);
    }
    let xi = (1.0 - gamma) / 2.0;
    if phi * k as f64 <= tau * xi {
        (true, Some(xi))
    } else {
        (false, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Remark3Witness {
    pub nu: f64,
    pub psi: f64,
}

/// The ν values scanned by [`remark3_check`]: log-spaced on `[1e-4, 0.999]`.
pub fn nu_grid() -> Vec<f64> {
    let (lo, hi) = (1e-4f64.ln(), 0.999f64.ln());
    (0..NU_GRID_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (NU_GRID_POINTS - 1) as f64).exp())
        .collect()
}

/// Coherence form of the ℓ1-stage condition:
/// `φkψ ≤ τν`, `kμ_Sc ≤ (1−ν)/ψ`, `(k−1)μ_S ≤ 1 − (1+ν)/ψ`.
///
/// For a fixed ν the admissible ψ form an interval, computed exactly; the
/// first grid value of ν with a nonempty interval is returned with the
/// smallest admissible ψ.
pub fn remark3_check(mu_s: f64, mu_sc: f64, k: usize, phi: f64, tau: f64) -> (bool, Option<Remark3Witness>) {
    if !(tau > 0.0) {
        return (false, None);
    }
    let kf = k as f64;
    let room = 1.0 - (kf - 1.0).max(0.0) * mu_s;
    if !(room > 0.0) {
        return (false, None);
    }
    for nu in nu_grid() {
        let lower = (1.0 + nu) / room;
        let by_noise = if phi * kf > 0.0 { tau * nu / (phi * kf) } else { f64::INFINITY };
        let by_cross = if kf * mu_sc > 0.0 { (1.0 - nu) / (kf * mu_sc) } else { f64::INFINITY };
        let upper = by_noise.min(by_cross);
        if lower <= upper {
            return (true, Some(Remark3Witness { nu, psi: lower }));
        }
    }
    (false, None)
}

/// Inputs and outcomes of every diagnostic on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub k_hat: usize,
    pub c: f64,
    pub d: f64,
    pub tau: f64,
    pub bound_a: f64,
    pub bound_y: f64,
    /// Coherence of Ā.
    pub mu: f64,
    /// Coherence of the support columns of Ā.
    pub mu_s: f64,
    /// Cross-coherence between off-support and support columns of Ā.
    pub mu_sc: f64,
    /// Coherence of the tight frame Q.
    pub mu_q: f64,
    /// `gamma` of the column-normalized Ā.
    pub gamma: f64,
    pub phi: f64,
    pub lemma1_residual: f64,
    pub theorem1: Theorem1Report,
    pub theorem2: (bool, Option<f64>),
    pub remark3: (bool, Option<Remark3Witness>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    /// Polishing threshold; `None` uses `c/2`.
    pub tau: Option<f64>,
    /// Estimated sparsity; `None` uses `k`.
    pub k_hat: Option<usize>,
    pub cross: CrossTerm,
    pub noise: NoiseTerm,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { tau: None, k_hat: None, cross: CrossTerm::AbsoluteSum, noise: NoiseTerm::Componentwise }
    }
}

pub fn theory_report(gt: &GroundTruth, p: &PerturbedProblem, opts: &ReportOptions) -> Result<TheoryReport> {
    let s = &gt.support;
    let sc: Support = (0..p.n()).filter(|j| !s.contains(j)).collect();
    let k = gt.k();
    let k_hat = opts.k_hat.unwrap_or(k);
    let tau = opts.tau.unwrap_or(gt.c / 2.0);
    let (a_norm, _) = normalize_columns(&p.a_bar)?;
    let q = tight_frame(&p.a_bar)?;
    let g = gamma(&a_norm, s);
    let ph = phi(p.m(), p.bound_y, p.bound_a, k, k_hat, gt.d);
    let mu_s = coherence_on(&p.a_bar, s)?;
    let mu_sc = cross_coherence(&p.a_bar, &sc, s)?;
    Ok(TheoryReport {
        m: p.m(),
        n: p.n(),
        k,
        k_hat,
        c: gt.c,
        d: gt.d,
        tau,
        bound_a: p.bound_a,
        bound_y: p.bound_y,
        mu: coherence(&p.a_bar)?,
        mu_s,
        mu_sc,
        mu_q: coherence(&q)?,
        gamma: g,
        phi: ph,
        lemma1_residual: lemma1_check(&p.a_bar, s)?,
        theorem1: theorem1_check(gt, p, opts.cross, opts.noise)?,
        theorem2: theorem2_check(g, ph, k, tau),
        remark3: remark3_check(mu_s, mu_sc, k, ph, tau),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ensemble {
    Gaussian,
    Arx,
}

impl Ensemble {
    pub fn as_str(self) -> &'static str {
        match self {
            Ensemble::Gaussian => "gaussian",
            Ensemble::Arx => "arx",
        }
    }
}

impl std::str::FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Ensemble::Gaussian),
            "arx" => Ok(Ensemble::Arx),
            other => Err(Error::InvalidInput(format!("unknown ensemble `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaStudyConfig {
    pub ensemble: Ensemble,
    pub n: usize,
    /// Autoregressive order for the ARX ensemble; the exogenous order is `n − na`.
    pub na: usize,
    pub m_grid: Vec<usize>,
    pub k_grid: Vec<usize>,
    pub runs: usize,
    pub entry_std: f64,
    pub c: f64,
    pub d: f64,
    /// Equation-error standard deviation of ARX draws.
    pub system_noise_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaCell {
    pub m: usize,
    pub k: usize,
    /// Mean `gamma` of the column-normalized matrix.
    pub gamma_a: f64,
    /// Mean `gamma` of the column-normalized tight frame.
    pub gamma_q: f64,
    /// Mean in-support term of `gamma` for the normalized tight frame.
    pub gamma_qs: f64,
    /// Draws that failed (rank-deficient or unstable) and were skipped.
    pub skipped: usize,
}

fn gamma_draw(cfg: &GammaStudyConfig, m: usize, k: usize, run: usize) -> Result<(f64, f64, f64)> {
    let seed = datagen::derive_seed(cfg.seed, &[m as u64, k as u64, run as u64]);
    let gt = match cfg.ensemble {
        Ensemble::Gaussian => datagen::gen_gaussian(&GaussianSpec {
            n: cfg.n,
            m,
            k,
            c: cfg.c,
            d: cfg.d,
            entry_std: cfg.entry_std,
            seed,
        })?,
        Ensemble::Arx => {
            let spec = ArxSpec { na: cfg.na, nb: cfg.n - cfg.na, m, k, c: cfg.c, d: cfg.d, input_std: cfg.entry_std, system_noise_std: cfg.system_noise_std, seed, ..ArxSpec::default() };
            datagen::gen_arx(&spec)?.0
        }
    };
    let (a_norm, _) = normalize_columns(&gt.a)?;
    let (q_norm, _) = normalize_columns(&tight_frame(&gt.a)?)?;
    let (qs, _) = gamma_terms(&q_norm, &gt.support);
    Ok((gamma(&a_norm, &gt.support), gamma(&q_norm, &gt.support), qs))
}

/// Mean `gamma` values over `runs` draws for every `(m, k)` grid cell.
pub fn gamma_study(cfg: &GammaStudyConfig) -> Result<Vec<GammaCell>> {
    if cfg.m_grid.is_empty() || cfg.k_grid.is_empty() || cfg.runs == 0 {
        return Err(Error::InvalidInput("gamma study needs nonempty grids and runs >= 1".into()));
    }
    if cfg.ensemble == Ensemble::Arx && cfg.na >= cfg.n {
        return Err(Error::InvalidInput("ARX ensemble needs na < n".into()));
    }
    let cells: Vec<(usize, usize)> = cfg.m_grid.iter().flat_map(|&m| cfg.k_grid.iter().map(move |&k| (m, k))).collect();
    for &(m, k) in &cells {
        if k > cfg.n || m == 0 {
            return Err(Error::InvalidInput(format!("invalid grid cell m = {m}, k = {k}")));
        }
    }
    Ok(cells
        .par_iter()
        .map(|&(m, k)| {
            let draws: Vec<Result<(f64, f64, f64)>> = (0..cfg.runs).into_par_iter().map(|r| gamma_draw(cfg, m, k, r)).collect();
            let ok: Vec<(f64, f64, f64)> = draws.iter().filter_map(|d| d.as_ref().ok().copied()).collect();
            let cnt = ok.len().max(1) as f64;
            let sum = ok.iter().fold((0.0, 0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1, acc.2 + v.2));
            GammaCell {
                m,
                k,
                gamma_a: if ok.is_empty() { f64::NAN } else { sum.0 / cnt },
                gamma_q: if ok.is_empty() { f64::NAN } else { sum.1 / cnt },
                gamma_qs: if ok.is_empty() { f64::NAN } else { sum.2 / cnt },
                skipped: cfg.runs - ok.len(),
            }
        })
        .collect())
}

//! Domain types shared across the crate, plus a handful of primitive
//! operations on them: the generalized sign, column normalization,
//! polishing and support comparison.
//!
//! Index sets are 0-based throughout the library.

use std::collections::BTreeSet;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Column norms below this are treated as zero by [`normalize_columns`].
pub const ZERO_COLUMN_TOL: f64 = 1e-12;

/// Index set of (estimated or true) nonzero entries.
pub type Support = BTreeSet<usize>;

/// A dense, finite, non-empty real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix must be non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(DenseMatrix(m))
    }

    /// Builds a matrix from entries listed row by row.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(rows.len(), cols, &flat)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            out.extend(self.0.row(i).iter());
        }
        out
    }
}

impl Deref for DenseMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// The unobserved truth behind a perturbed problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub x_true: DVector<f64>,
    pub support: Support,
    /// Smallest nonzero magnitude of `x_true`.
    pub c: f64,
    /// Largest nonzero magnitude of `x_true`.
    pub d: f64,
    pub a: DenseMatrix,
    pub y: DVector<f64>,
    pub delta_a: DenseMatrix,
    pub delta_y: DVector<f64>,
}

impl GroundTruth {
    /// Unperturbed truth with `y = A x`; the perturbation fields are zero.
    pub fn noiseless(a: DenseMatrix, x_true: DVector<f64>, c: f64, d: f64) -> Result<Self> {
        if a.cols() != x_true.len() {
            return Err(Error::DimensionMismatch(format!(
                "A has {} columns, x has {} entries",
                a.cols(),
                x_true.len()
            )));
        }
        let y = a.as_matrix() * &x_true;
        let (m, n) = (a.rows(), a.cols());
        let gt = GroundTruth {
            support: support_of(x_true.as_slice()),
            x_true,
            c,
            d,
            y,
            delta_a: DenseMatrix(DMatrix::zeros(m, n)),
            delta_y: DVector::zeros(m),
            a,
        };
        gt.validate()?;
        Ok(gt)
    }

    pub fn k(&self) -> usize {
        self.support.len()
    }

    /// Checks the structural invariants (everything except the perturbation bounds).
    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.a.rows(), self.a.cols());
        if self.x_true.len() != n
            || self.y.len() != m
            || self.delta_y.len() != m
            || self.delta_a.shape() != (m, n)
        {
            return Err(Error::DimensionMismatch("ground truth fields disagree".into()));
        }
        if self.support != support_of(self.x_true.as_slice()) {
            return Err(Error::InvalidInput("support does not match x_true".into()));
        }
        if !(self.c > 0.0 && self.d >= self.c) {
            return Err(Error::InvalidInput(format!(
                "magnitude range must satisfy 0 < c <= d, got c = {}, d = {}",
                self.c, self.d
            )));
        }
        let slack = 1e-12 * self.d.max(1.0);
        for &i in &self.support {
            let v = self.x_true[i].abs();
            if v < self.c - slack || v > self.d + slack {
                return Err(Error::InvalidInput(format!(
                    "|x[{i}]| = {v} lies outside [{}, {}]",
                    self.c, self.d
                )));
            }
        }
        let resid = (&self.y - self.a.as_matrix() * &self.x_true).amax();
        if resid > 1e-12 * (1.0 + self.y.amax()) {
            return Err(Error::InvalidInput(format!("y != A x (residual {resid:e})")));
        }
        Ok(())
    }
}

/// What the solver observes: perturbed data and the perturbation bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedProblem {
    pub a_bar: DenseMatrix,
    pub y_bar: DVector<f64>,
    pub bound_a: f64,
    pub bound_y: f64,
}

impl PerturbedProblem {
    pub fn new(a_bar: DenseMatrix, y_bar: DVector<f64>, bound_a: f64, bound_y: f64) -> Result<Self> {
        if a_bar.rows() != y_bar.len() {
            return Err(Error::DimensionMismatch(format!(
                "A has {} rows, y has {} entries",
                a_bar.rows(),
                y_bar.len()
            )));
        }
        if y_bar.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("y has non-finite entries".into()));
        }
        if !(bound_a >= 0.0 && bound_y >= 0.0) || !bound_a.is_finite() || !bound_y.is_finite() {
            return Err(Error::InvalidInput(format!(
                "perturbation bounds must be finite and nonnegative, got {bound_a}, {bound_y}"
            )));
        }
        Ok(PerturbedProblem { a_bar, y_bar, bound_a, bound_y })
    }

    pub fn m(&self) -> usize {
        self.a_bar.rows()
    }

    pub fn n(&self) -> usize {
        self.a_bar.cols()
    }
}

/// Sign pattern in {-1, +1}^n.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidInput("signs must be +1 or -1".into()));
        }
        Ok(SignVector(signs))
    }

    /// All-positive pattern of length `n`.
    pub fn positive(n: usize) -> Self {
        SignVector(vec![1; n])
    }

    /// The `index`-th pattern in lexicographic order (bit set means +1,
    /// most significant bit first), so `from_index(n, 0)` is all -1.
    pub fn from_index(n: usize, index: u64) -> Self {
        SignVector(
            (0..n)
                .map(|i| if index >> (n - 1 - i) & 1 == 1 { 1 } else { -1 })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        f64::from(self.0[i])
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&s| f64::from(s)).collect()
    }

    /// True when the pattern agrees with the sign of `x` on every index of `support`.
    pub fn matches_on(&self, x: &[f64], support: &Support) -> bool {
        support.iter().all(|&i| {
            let s = self.0[i];
            (s > 0 && x[i] > 0.0) || (s < 0 && x[i] < 0.0)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryStatus {
    Solved,
    Infeasible,
    MaxIterations,
}

impl RecoveryStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecoveryStatus::Solved => "solved",
            RecoveryStatus::Infeasible => "infeasible",
            RecoveryStatus::MaxIterations => "max_iterations",
        }
    }
}

/// Output of a recovery method after polishing.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub estimate: DVector<f64>,
    pub support_estimate: Support,
    pub tau: f64,
    pub status: RecoveryStatus,
    /// ℓ1 norm of `estimate` when solved.
    pub objective: f64,
    /// Sign pattern the estimate was built on, when the method uses one.
    pub signs: Option<SignVector>,
}

impl RecoveryResult {
    pub fn solved(estimate: DVector<f64>, tau: f64, signs: Option<SignVector>) -> Self {
        RecoveryResult {
            support_estimate: polish(estimate.as_slice(), tau),
            objective: estimate.lp_norm(1),
            estimate,
            tau,
            status: RecoveryStatus::Solved,
            signs,
        }
    }

    pub fn failed(n: usize, tau: f64, status: RecoveryStatus, signs: Option<SignVector>) -> Self {
        RecoveryResult {
            estimate: DVector::zeros(n),
            support_estimate: Support::new(),
            tau,
            status,
            objective: f64::NAN,
            signs,
        }
    }
}

/// Generalized sign: `+1` for `v_i >= 0`, `-1` otherwise.
pub fn generalized_sign(v: &[f64]) -> SignVector {
    SignVector(v.iter().map(|&x| if x >= 0.0 { 1 } else { -1 }).collect())
}

/// Scales every column to unit ℓ2 norm. Returns the scaled matrix and the
/// original column norms, so that `m = normalized * diag(scales)`.
pub fn normalize_columns(m: &DenseMatrix) -> Result<(DenseMatrix, DVector<f64>)> {
    let mut out = m.as_matrix().clone();
    let mut scales = DVector::zeros(m.cols());
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm < ZERO_COLUMN_TOL {
            return Err(Error::ZeroColumn(j));
        }
        col /= norm;
        scales[j] = norm;
    }
    Ok((DenseMatrix(out), scales))
}

/// Maps a solution of the column-normalized system back to the original
/// scaling (`x -> diag(scales)^-1 x`).
pub fn rescale_solution(x: &DVector<f64>, scales: &DVector<f64>) -> DVector<f64> {
    x.component_div(scales)
}

/// Indices whose magnitude strictly exceeds `tau`.
pub fn polish(x: &[f64], tau: f64) -> Support {
    x.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > tau)
        .map(|(i, _)| i)
        .collect()
}

/// Indices of exactly nonzero entries.
pub fn support_of(x: &[f64]) -> Support {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// 1 when the two index sets coincide, 0 otherwise.
pub fn support_match(estimated: &Support, truth: &Support) -> u8 {
    u8::from(estimated == truth)
}

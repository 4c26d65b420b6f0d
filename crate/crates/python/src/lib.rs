//! Python bindings for the `eiv_sparse` recovery library.
//!
//! Matrices cross the boundary as lists of rows and vectors as lists of
//! floats. Support indices are 0-based on the Python side.

use nalgebra::DVector;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use eiv_sparse::baselines;
use eiv_sparse::harness::{self, ExperimentConfig};
use eiv_sparse::instance::Instance;
use eiv_sparse::sign_stage::Lambda;
use eiv_sparse::{analysis, fixtures, DenseMatrix, Error, LpConfig, RecoveryConfig, RecoveryResult, TikhonovConfig};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Parse { .. } | Error::InvalidInput(_) | Error::DimensionMismatch(_) | Error::TooLarge { .. } | Error::Io(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    DenseMatrix::from_rows(&rows).map_err(to_py)
}

fn rows_of(m: &DenseMatrix) -> Vec<Vec<f64>> {
    m.as_matrix().row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn tikhonov(lambda_relative: Option<f64>) -> TikhonovConfig {
    lambda_relative.map_or_else(TikhonovConfig::default, |f| TikhonovConfig { lambda: Lambda::Relative(f) })
}

/// Observed data `(Ā, ȳ)` with entrywise perturbation bounds.
#[pyclass(name = "Problem", module = "eiv_sparse", frozen)]
#[derive(Clone)]
struct PyProblem {
    inner: eiv_sparse::PerturbedProblem,
    true_x: Option<Vec<f64>>,
    magnitude_floor: Option<f64>,
}

#[pymethods]
impl PyProblem {
    #[new]
    fn new(a_bar: Vec<Vec<f64>>, y_bar: Vec<f64>, bound_a: f64, bound_y: f64) -> PyResult<Self> {
        let p = eiv_sparse::PerturbedProblem::new(matrix(a_bar)?, DVector::from_vec(y_bar), bound_a, bound_y).map_err(to_py)?;
        Ok(PyProblem { inner: p, true_x: None, magnitude_floor: None })
    }

    /// The bundled three-dimensional worked example.
    #[staticmethod]
    fn worked_example() -> Self {
        let (gt, p) = fixtures::worked_example();
        PyProblem { inner: p, true_x: Some(gt.x_true.as_slice().to_vec()), magnitude_floor: Some(gt.c) }
    }

    /// Reads an instance file.
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        let inst = Instance::read(std::path::Path::new(path)).map_err(to_py)?;
        let true_x = inst.truth.as_ref().map(|t| t.x_true.as_slice().to_vec());
        let magnitude_floor = inst.truth.as_ref().map(|t| t.c);
        Ok(PyProblem { inner: inst.problem, true_x, magnitude_floor })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn a_bar(&self) -> Vec<Vec<f64>> {
        rows_of(&self.inner.a_bar)
    }

    #[getter]
    fn y_bar(&self) -> Vec<f64> {
        self.inner.y_bar.as_slice().to_vec()
    }

    #[getter]
    fn bound_a(&self) -> f64 {
        self.inner.bound_a
    }

    #[getter]
    fn bound_y(&self) -> f64 {
        self.inner.bound_y
    }

    /// Ground-truth vector when the problem came with one.
    #[getter]
    fn x_true(&self) -> Option<Vec<f64>> {
        self.true_x.clone()
    }

    /// Smallest nonzero magnitude of the ground truth, when known.
    #[getter]
    fn c(&self) -> Option<f64> {
        self.magnitude_floor
    }

    fn __repr__(&self) -> String {
        format!("Problem(m={}, n={}, bound_a={}, bound_y={})", self.inner.m(), self.inner.n(), self.inner.bound_a, self.inner.bound_y)
    }
}

/// Polished output of a recovery method.
#[pyclass(name = "Recovery", module = "eiv_sparse", frozen, get_all)]
struct PyRecovery {
    estimate: Vec<f64>,
    support: Vec<usize>,
    status: String,
    objective: f64,
    tau: f64,
    signs: Option<Vec<i8>>,
}

#[pymethods]
impl PyRecovery {
    #[getter]
    fn solved(&self) -> bool {
        self.status == "solved"
    }

    fn __repr__(&self) -> String {
        format!("Recovery(status={:?}, support={:?}, objective={})", self.status, self.support, self.objective)
    }
}

impl From<RecoveryResult> for PyRecovery {
    fn from(r: RecoveryResult) -> Self {
        PyRecovery {
            estimate: r.estimate.as_slice().to_vec(),
            support: r.support_estimate.into_iter().collect(),
            status: r.status.as_str().to_string(),
            objective: r.objective,
            tau: r.tau,
            signs: r.signs.map(|s| s.as_slice().to_vec()),
        }
    }
}

/// Regularized minimum-norm estimate `Āᵀ(ĀĀᵀ + λI)⁻¹ȳ`.
#[pyfunction]
#[pyo3(signature = (problem, lambda_relative = None))]
fn tikhonov_estimate(problem: &PyProblem, lambda_relative: Option<f64>) -> PyResult<Vec<f64>> {
    let x = eiv_sparse::tikhonov_estimate(&problem.inner, &tikhonov(lambda_relative)).map_err(to_py)?;
    Ok(x.as_slice().to_vec())
}

/// Sign pattern (entries ±1) of the regularized estimate.
#[pyfunction]
#[pyo3(signature = (problem, lambda_relative = None))]
fn estimate_signs(problem: &PyProblem, lambda_relative: Option<f64>) -> PyResult<Vec<i8>> {
    let s = eiv_sparse::estimate_signs(&problem.inner, &tikhonov(lambda_relative)).map_err(to_py)?;
    Ok(s.as_slice().to_vec())
}

/// Two-stage recovery: sign estimate, then the sign-constrained LP, then
/// polishing with `tau` (default: half the known magnitude floor).
#[pyfunction]
#[pyo3(signature = (problem, tau = None, normalize = false, lambda_relative = None))]
fn l2l1_recover(problem: &PyProblem, tau: Option<f64>, normalize: bool, lambda_relative: Option<f64>) -> PyResult<PyRecovery> {
    let tau = tau
        .or(problem.magnitude_floor.map(|c| c / 2.0))
        .ok_or_else(|| PyValueError::new_err("tau is required when the magnitude floor is unknown"))?;
    let cfg = RecoveryConfig { tikhonov: tikhonov(lambda_relative), normalize, ..RecoveryConfig::with_tau(tau) };
    eiv_sparse::l2l1_recover(&problem.inner, &cfg).map(Into::into).map_err(to_py)
}

/// Exhaustive search of the LP relaxation over every sign pattern.
#[pyfunction]
fn orthant_oracle(problem: &PyProblem, tau: f64) -> PyResult<PyRecovery> {
    baselines::orthant_oracle(&problem.inner, tau, &LpConfig::default()).map(Into::into).map_err(to_py)
}

/// `min ‖x‖₁ s.t. Āx = ȳ`.
#[pyfunction]
fn basis_pursuit(a_bar: Vec<Vec<f64>>, y_bar: Vec<f64>) -> PyResult<Vec<f64>> {
    let x = baselines::basis_pursuit(&matrix(a_bar)?, &DVector::from_vec(y_bar), &LpConfig::default()).map_err(to_py)?;
    Ok(x.as_slice().to_vec())
}

/// `min ‖x‖₁ s.t. ‖Āx − ȳ‖∞ ≤ eta`.
#[pyfunction]
fn bpdn_inf(a_bar: Vec<Vec<f64>>, y_bar: Vec<f64>, eta: f64) -> PyResult<Vec<f64>> {
    let x = baselines::bpdn_inf(&matrix(a_bar)?, &DVector::from_vec(y_bar), eta, &LpConfig::default()).map_err(to_py)?;
    Ok(x.as_slice().to_vec())
}

/// Proximal-gradient Lasso on `‖Āx − ȳ‖² + λ‖x‖₁`.
#[pyfunction]
#[pyo3(signature = (a_bar, y_bar, lam, max_iter = 5000, step_tol = 1e-7))]
fn lasso(a_bar: Vec<Vec<f64>>, y_bar: Vec<f64>, lam: f64, max_iter: usize, step_tol: f64) -> PyResult<Vec<f64>> {
    let out = baselines::lasso(&matrix(a_bar)?, &DVector::from_vec(y_bar), lam, max_iter, step_tol).map_err(to_py)?;
    Ok(out.x.as_slice().to_vec())
}

/// Mutual coherence: largest normalized inner product of distinct columns.
#[pyfunction]
fn coherence(a: Vec<Vec<f64>>) -> PyResult<f64> {
    analysis::coherence(&matrix(a)?).map_err(to_py)
}

/// Row-orthonormal frame `Q` with the same row space as `a`.
#[pyfunction]
fn tight_frame(a: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    analysis::tight_frame(&matrix(a)?).map(|q| rows_of(&q)).map_err(to_py)
}

/// Largest entry of `Ā_Sᵀ(ĀĀᵀ)⁻¹Ā_S − Q_SᵀQ_S`.
#[pyfunction]
fn lemma1_check(a: Vec<Vec<f64>>, support: Vec<usize>) -> PyResult<f64> {
    analysis::lemma1_check(&matrix(a)?, &support.into_iter().collect()).map_err(to_py)
}

/// Runs the benchmark described by `key = value` config text and returns CSV.
#[pyfunction]
#[pyo3(signature = (config_text, seed = None))]
fn run_bench(py: Python<'_>, config_text: &str, seed: Option<u64>) -> PyResult<String> {
    let mut cfg = ExperimentConfig::parse(config_text).map_err(to_py)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    py.allow_threads(|| harness::run_bench(&cfg)).map(|(csv, _)| csv).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "eiv_sparse")]
fn eiv_sparse_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyRecovery>()?;
    m.add_function(wrap_pyfunction!(tikhonov_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_signs, m)?)?;
    m.add_function(wrap_pyfunction!(l2l1_recover, m)?)?;
    m.add_function(wrap_pyfunction!(orthant_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(basis_pursuit, m)?)?;
    m.add_function(wrap_pyfunction!(bpdn_inf, m)?)?;
    m.add_function(wrap_pyfunction!(lasso, m)?)?;
    m.add_function(wrap_pyfunction!(coherence, m)?)?;
    m.add_function(wrap_pyfunction!(tight_frame, m)?)?;
    m.add_function(wrap_pyfunction!(lemma1_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    Ok(())
}

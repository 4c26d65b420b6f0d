//! Monte Carlo experiment runner.
//!
//! For every `(m, trial)` pair one clean instance and one unit-box noise
//! draw are generated; each `Δ` in the grid scales the same noise, and every
//! method sees the same perturbed problem. Trials run in parallel and are
//! reduced in trial order, so reports do not depend on the thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::analysis::{Ensemble, GammaCell, GammaStudyConfig};
use crate::baselines::{self, BaselineConfig, LassoLambda, LASSO_GRID, ORTHANT_LIMIT};
use crate::datagen::{self, ArxSpec, GaussianSpec};
use crate::error::{Error, Result};
use crate::l1_stage::{l2l1_recover, RecoveryConfig};
use crate::lp::LpConfig;
use crate::model::{support_match, GroundTruth, PerturbedProblem, RecoveryResult, RecoveryStatus};
use crate::sign_stage::{Lambda, TikhonovConfig};

pub const CSV_HEADER: &str = "method,m,delta,snr_db_mean,success_rate,sign_rate,infeasible,runtime_ms_mean,runs,seed";
pub const DEFAULT_GAMMA_SYSTEM_NOISE_STD: f64 = 0.1;
pub const GAMMA_CSV_HEADER: &str = "ensemble,m,k,gamma_a,gamma_q,gamma_qs,skipped,runs,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    L2l1,
    BpdnInf,
    Lasso,
    BasisPursuit,
    OrthantOracle,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::L2l1, Method::BpdnInf, Method::Lasso, Method::BasisPursuit, Method::OrthantOracle];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::L2l1 => "l2l1",
            Method::BpdnInf => "bpdn_inf",
            Method::Lasso => "lasso",
            Method::BasisPursuit => "basis_pursuit",
            Method::OrthantOracle => "orthant_oracle",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Recovery,
    Gamma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub study: Study,
    pub ensemble: Ensemble,
    pub n: usize,
    /// Autoregressive order of the ARX ensemble; the exogenous order is `n − na`.
    pub na: usize,
    pub k: usize,
    /// Sparsity grid of the γ study.
    pub k_grid: Vec<usize>,
    pub c: f64,
    pub d: f64,
    pub m_grid: Vec<usize>,
    pub delta_grid: Vec<f64>,
    pub runs: usize,
    pub methods: Vec<Method>,
    /// `None` uses `c/2`.
    pub tau: Option<f64>,
    pub tikhonov: TikhonovConfig,
    pub baseline: BaselineConfig,
    pub lp: LpConfig,
    pub normalize: bool,
    pub entry_std: f64,
    pub input_std: f64,
    pub burn_in: usize,
    /// Equation-error standard deviation of ARX draws in the γ study.
    pub gamma_system_noise_std: f64,
    /// Record wall-clock runtimes; when off, runtimes print as `NA` and the
    /// CSV is byte-reproducible.
    pub timing: bool,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn gaussian() -> Self {
        ExperimentConfig {
            study: Study::Recovery,
            ensemble: Ensemble::Gaussian,
            n: 100,
            na: 50,
            k: 10,
            k_grid: vec![1, 2, 5, 10],
            c: 0.5,
            d: 1.0,
            m_grid: vec![30, 50, 70, 90],
            delta_grid: vec![0.004, 0.007, 0.010, 0.013, 0.016, 0.019, 0.022],
            runs: 100,
            methods: vec![Method::L2l1, Method::BpdnInf, Method::Lasso],
            tau: None,
            tikhonov: TikhonovConfig::default(),
            baseline: BaselineConfig::default(),
            lp: LpConfig::default(),
            normalize: false,
            entry_std: datagen::DEFAULT_ENTRY_STD,
            input_std: datagen::DEFAULT_INPUT_STD,
            burn_in: datagen::DEFAULT_BURN_IN,
            gamma_system_noise_std: DEFAULT_GAMMA_SYSTEM_NOISE_STD,
            timing: true,
            seed: 1,
        }
    }

    pub fn arx() -> Self {
        ExperimentConfig {
            ensemble: Ensemble::Arx,
            c: 0.2,
            d: 0.4,
            delta_grid: vec![0.002, 0.0035, 0.005, 0.0065, 0.008, 0.0095, 0.011],
            runs: 50,
            ..Self::gaussian()
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau.unwrap_or(self.c / 2.0)
    }

    pub fn recovery_config(&self) -> RecoveryConfig {
        RecoveryConfig { tikhonov: self.tikhonov, tau: self.tau(), lp: self.lp, normalize: self.normalize }
    }

    /// Parses `key = value` lines; `#` starts a comment and lists are
    /// comma-separated. Unset keys keep the defaults of the chosen ensemble.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: idx + 1, msg: "expected `key = value`".into() })?;
            let key = k.trim().to_string();
            if pairs.insert(key.clone(), (idx + 1, v.trim().to_string())).is_some() {
                return Err(Error::Parse { line: idx + 1, msg: format!("duplicate key `{key}`") });
            }
        }
        let mut cfg = match pairs.get("ensemble") {
            None => Self::gaussian(),
            Some((line, v)) => match v.parse::<Ensemble>() {
                Ok(Ensemble::Gaussian) => Self::gaussian(),
                Ok(Ensemble::Arx) => Self::arx(),
                Err(e) => return Err(Error::Parse { line: *line, msg: e.to_string() }),
            },
        };
        for (key, (line, value)) in &pairs {
            cfg.apply(key, value).map_err(|e| Error::Parse { line: *line, msg: format!("{key}: {e}") })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, v: &str) -> Result<()> {
        fn num<T: FromStr>(v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::InvalidInput(format!("bad value `{v}`")))
        }
        fn list<T: FromStr>(v: &str) -> Result<Vec<T>> {
            v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(num).collect()
        }
        fn flag(v: &str) -> Result<bool> {
            match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::InvalidInput(format!("bad boolean `{v}`"))),
            }
        }
        match key {
            "ensemble" => {}
            "study" => {
                self.study = match v {
                    "recovery" => Study::Recovery,
                    "gamma" => Study::Gamma,
                    _ => return Err(Error::InvalidInput(format!("unknown study `{v}`"))),
                }
            }
            "n" => self.n = num(v)?,
            "na" => self.na = num(v)?,
            "k" => self.k = num(v)?,
            "k_grid" => self.k_grid = list(v)?,
            "c" => self.c = num(v)?,
            "d" => self.d = num(v)?,
            "m_grid" => self.m_grid = list(v)?,
            "delta_grid" => self.delta_grid = list(v)?,
            "runs" => self.runs = num(v)?,
            "methods" => self.methods = list(v)?,
            "tau" => self.tau = Some(num(v)?),
            "tikhonov_relative" => self.tikhonov.lambda = Lambda::Relative(num(v)?),
            "tikhonov_lambda" => self.tikhonov.lambda = Lambda::Absolute(num(v)?),
            "lasso_lambda" => {
                self.baseline.lasso_lambda = if v == "grid" {
                    LassoLambda::Grid(LASSO_GRID.to_vec())
                } else {
                    LassoLambda::Fixed(num(v)?)
                }
            }
            "lasso_grid" => self.baseline.lasso_lambda = LassoLambda::Grid(list(v)?),
            "bpdn_eta" => self.baseline.bpdn_eta = if v == "bound_y" { None } else { Some(num(v)?) },
            "baseline_max_iter" => self.baseline.max_iter = num(v)?,
            "baseline_step_tol" => self.baseline.step_tol = num(v)?,
            "lp_tol" => {
                let t: f64 = num(v)?;
                self.lp.feas_tol = t;
                self.lp.opt_tol = t;
            }
            "lp_max_iter" => self.lp.max_iter = num(v)?,
            "normalize" => self.normalize = flag(v)?,
            "entry_std" => self.entry_std = num(v)?,
            "input_std" => self.input_std = num(v)?,
            "burn_in" => self.burn_in = num(v)?,
            "gamma_system_noise_std" => self.gamma_system_noise_std = num(v)?,
            "timing" => self.timing = flag(v)?,
            "seed" => self.seed = num(v)?,
            _ => return Err(Error::InvalidInput("unknown key".into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.m_grid.is_empty() || self.m_grid.contains(&0) {
            return bad("m_grid must be a nonempty list of positive counts".into());
        }
        if self.n == 0 || !(self.c > 0.0 && self.d >= self.c) {
            return bad(format!("need n >= 1 and 0 < c <= d, got n = {}, c = {}, d = {}", self.n, self.c, self.d));
        }
        if self.ensemble == Ensemble::Arx && self.na >= self.n {
            return bad(format!("na = {} must be below n = {}", self.na, self.n));
        }
        if !(self.tau() > 0.0) {
            return bad("tau must be positive".into());
        }
        match self.study {
            Study::Gamma => {
                if self.k_grid.is_empty() || self.k_grid.iter().any(|&k| k > self.n) {
                    return bad("k_grid must be nonempty with entries <= n".into());
                }
            }
            Study::Recovery => {
                if self.k > self.n {
                    return bad(format!("k = {} exceeds n = {}", self.k, self.n));
                }
                if self.delta_grid.is_empty() || self.delta_grid.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
                    return bad("delta_grid must be a nonempty list of nonnegative numbers".into());
                }
                if self.methods.is_empty() {
                    return bad("methods must not be empty".into());
                }
                if self.methods.contains(&Method::OrthantOracle) && self.n > ORTHANT_LIMIT {
                    return bad(format!("orthant_oracle needs n <= {ORTHANT_LIMIT}"));
                }
            }
        }
        if let LassoLambda::Grid(g) = &self.baseline.lasso_lambda {
            if g.is_empty() || g.iter().any(|f| !(*f > 0.0)) {
                return bad("lasso_grid must be a nonempty list of positive factors".into());
            }
        }
        Ok(())
    }

    /// `key = value` echo of every setting.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let joinu = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "study = {}", if self.study == Study::Gamma { "gamma" } else { "recovery" });
        let _ = writeln!(s, "ensemble = {}", self.ensemble.as_str());
        let _ = writeln!(s, "n = {}", self.n);
        if self.ensemble == Ensemble::Arx {
            let _ = writeln!(s, "na = {}", self.na);
        }
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "k_grid = {}", joinu(&self.k_grid));
        let _ = writeln!(s, "c = {}", self.c);
        let _ = writeln!(s, "d = {}", self.d);
        let _ = writeln!(s, "m_grid = {}", joinu(&self.m_grid));
        let _ = writeln!(s, "delta_grid = {}", join(&self.delta_grid));
        let _ = writeln!(s, "runs = {}", self.runs);
        let methods: Vec<&str> = self.methods.iter().map(|m| m.as_str()).collect();
        let _ = writeln!(s, "methods = {}", methods.join(","));
        let _ = writeln!(s, "tau = {}", self.tau());
        match self.tikhonov.lambda {
            Lambda::Relative(f) => {
                let _ = writeln!(s, "tikhonov_relative = {f}");
            }
            Lambda::Absolute(l) => {
                let _ = writeln!(s, "tikhonov_lambda = {l}");
            }
        }
        match &self.baseline.lasso_lambda {
            LassoLambda::Fixed(l) => {
                let _ = writeln!(s, "lasso_lambda = {l}");
            }
            LassoLambda::Grid(g) => {
                let _ = writeln!(s, "lasso_grid = {}", join(g));
            }
        }
        match self.baseline.bpdn_eta {
            None => {
                let _ = writeln!(s, "bpdn_eta = bound_y");
            }
            Some(e) => {
                let _ = writeln!(s, "bpdn_eta = {e}");
            }
        }
        let _ = writeln!(s, "baseline_max_iter = {}", self.baseline.max_iter);
        let _ = writeln!(s, "baseline_step_tol = {}", self.baseline.step_tol);
        let _ = writeln!(s, "lp_tol = {}", self.lp.feas_tol);
        let _ = writeln!(s, "lp_max_iter = {}", self.lp.max_iter);
        let _ = writeln!(s, "normalize = {}", self.normalize);
        let _ = writeln!(s, "entry_std = {}", self.entry_std);
        let _ = writeln!(s, "input_std = {}", self.input_std);
        let _ = writeln!(s, "burn_in = {}", self.burn_in);
        let _ = writeln!(s, "gamma_system_noise_std = {}", self.gamma_system_noise_std);
        let _ = writeln!(s, "timing = {}", self.timing);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

/// One clean draw shared by every `Δ` and method of a trial.
pub struct TrialInstance {
    pub truth: GroundTruth,
    unit_a: nalgebra::DMatrix<f64>,
    unit_y: nalgebra::DVector<f64>,
    pub arx_retries: usize,
}

impl TrialInstance {
    pub fn perturbed(&self, delta: f64) -> Result<(GroundTruth, PerturbedProblem)> {
        datagen::perturb_with(&self.truth, &self.unit_a, &self.unit_y, delta, delta)
    }
}

/// Deterministic instance of trial `trial` at row count `m`.
pub fn trial_instance(cfg: &ExperimentConfig, m: usize, trial: usize) -> Result<TrialInstance> {
    let data_seed = datagen::derive_seed(cfg.seed, &[m as u64, trial as u64, 0]);
    let noise_seed = datagen::derive_seed(cfg.seed, &[m as u64, trial as u64, 1]);
    let (truth, arx_retries) = match cfg.ensemble {
        Ensemble::Gaussian => (
            datagen::gen_gaussian(&GaussianSpec { n: cfg.n, m, k: cfg.k, c: cfg.c, d: cfg.d, entry_std: cfg.entry_std, seed: data_seed })?,
            0,
        ),
        Ensemble::Arx => {
            let spec = ArxSpec {
                na: cfg.na,
                nb: cfg.n - cfg.na,
                m,
                k: cfg.k,
                c: cfg.c,
                d: cfg.d,
                input_std: cfg.input_std,
                system_noise_std: 0.0,
                seed: data_seed,
                burn_in: cfg.burn_in,
                max_retries: datagen::DEFAULT_MAX_RETRIES,
            };
            let (gt, detail) = datagen::gen_arx(&spec)?;
            (gt, detail.retries)
        }
    };
    let (unit_a, unit_y) = datagen::unit_noise(m, cfg.n, noise_seed);
    Ok(TrialInstance { truth, unit_a, unit_y, arx_retries })
}

/// Outcome of one method on one perturbed instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub success: bool,
    /// Estimated signs agree with the truth on its support (two-stage method only).
    pub sign_ok: Option<bool>,
    pub infeasible: bool,
    pub runtime_ms: f64,
}

fn classify(r: Result<RecoveryResult>, gt: &GroundTruth) -> (bool, bool) {
    match r {
        Ok(res) => (
            res.status == RecoveryStatus::Solved && support_match(&res.support_estimate, &gt.support) == 1,
            res.status == RecoveryStatus::Infeasible,
        ),
        Err(Error::Infeasible) => (false, true),
        Err(_) => (false, false),
    }
}

/// Runs `method` on one perturbed problem and scores the polished support.
pub fn solve_method(cfg: &ExperimentConfig, method: Method, gt: &GroundTruth, p: &PerturbedProblem) -> TrialOutcome {
    let tau = cfg.tau();
    let start = Instant::now();
    let mut sign_ok = None;
    let result: Result<RecoveryResult> = match method {
        Method::L2l1 => {
            let r = l2l1_recover(p, &cfg.recovery_config());
            sign_ok = Some(match &r {
                Ok(res) => res.signs.as_ref().is_some_and(|s| s.matches_on(gt.x_true.as_slice(), &gt.support)),
                Err(_) => false,
            });
            r
        }
        Method::BpdnInf => {
            let eta = cfg.baseline.bpdn_eta.unwrap_or(p.bound_y);
            baselines::bpdn_inf(&p.a_bar, &p.y_bar, eta, &cfg.lp).map(|x| baselines::baseline_result(x, tau))
        }
        Method::BasisPursuit => {
            baselines::basis_pursuit(&p.a_bar, &p.y_bar, &cfg.lp).map(|x| baselines::baseline_result(x, tau))
        }
        Method::Lasso => {
            let b = &cfg.baseline;
            match &b.lasso_lambda {
                LassoLambda::Fixed(l) => baselines::lasso(&p.a_bar, &p.y_bar, *l, b.max_iter, b.step_tol),
                LassoLambda::Grid(g) => baselines::lasso_select(p, g, b.max_iter, b.step_tol).map(|(o, _)| o),
            }
            .map(|o| baselines::baseline_result(o.x, tau))
        }
        Method::OrthantOracle => baselines::orthant_oracle(p, tau, &cfg.lp),
    };
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let (success, infeasible) = classify(result, gt);
    TrialOutcome { success, sign_ok, infeasible, runtime_ms }
}

/// Aggregated statistics of one `(method, m, Δ)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub method: Method,
    pub m: usize,
    pub delta: f64,
    pub snr_db_mean: f64,
    pub successes: usize,
    pub success_rate: f64,
    pub sign_rate: Option<f64>,
    pub infeasible: usize,
    pub runtime_ms_mean: Option<f64>,
    pub runs: usize,
    pub seed: u64,
}

impl CellStats {
    pub fn csv_row(&self) -> String {
        let na = |v: Option<f64>, prec: usize| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.prec$}"));
        format!(
            "{},{},{},{:.4},{:.4},{},{},{},{},{}",
            self.method.as_str(),
            self.m,
            self.delta,
            self.snr_db_mean,
            self.success_rate,
            na(self.sign_rate, 4),
            self.infeasible,
            na(self.runtime_ms_mean, 3),
            self.runs,
            self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub cells: Vec<CellStats>,
    pub provenance: String,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for c in &self.cells {
            s.push_str(&c.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn cell(&self, method: Method, m: usize, delta: f64) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.method == method && c.m == m && c.delta == delta)
    }
}

/// Results of one trial: SNR per `Δ` and outcomes per `(Δ, method)`.
struct TrialRecord {
    snr: Vec<f64>,
    outcomes: Vec<Vec<TrialOutcome>>,
    arx_retries: usize,
}

fn failed_outcome(method: Method) -> TrialOutcome {
    TrialOutcome {
        success: false,
        sign_ok: (method == Method::L2l1).then_some(false),
        infeasible: false,
        runtime_ms: 0.0,
    }
}

fn run_trial(cfg: &ExperimentConfig, m: usize, trial: usize, deltas: &[f64], methods: &[Method]) -> TrialRecord {
    let inst = match trial_instance(cfg, m, trial) {
        Ok(i) => i,
        Err(_) => {
            return TrialRecord {
                snr: vec![f64::NAN; deltas.len()],
                outcomes: deltas.iter().map(|_| methods.iter().map(|&mm| failed_outcome(mm)).collect()).collect(),
                arx_retries: datagen::DEFAULT_MAX_RETRIES,
            }
        }
    };
    let mut snr = Vec::with_capacity(deltas.len());
    let mut outcomes = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        match inst.perturbed(delta) {
            Ok((gt, p)) => {
                snr.push(datagen::snr_db(&gt).unwrap_or(f64::INFINITY));
                outcomes.push(methods.iter().map(|&mm| solve_method(cfg, mm, &gt, &p)).collect());
            }
            Err(_) => {
                snr.push(f64::NAN);
                outcomes.push(methods.iter().map(|&mm| failed_outcome(mm)).collect());
            }
        }
    }
    TrialRecord { snr, outcomes, arx_retries: inst.arx_retries }
}

fn aggregate(cfg: &ExperimentConfig, method: Method, m: usize, delta: f64, snrs: &[f64], outs: &[TrialOutcome]) -> CellStats {
    let runs = outs.len();
    let successes = outs.iter().filter(|o| o.success).count();
    let finite: Vec<f64> = snrs.iter().copied().filter(|s| !s.is_nan()).collect();
    let snr_db_mean = if finite.is_empty() { f64::NAN } else { finite.iter().sum::<f64>() / finite.len() as f64 };
    let sign_rate = (method == Method::L2l1)
        .then(|| outs.iter().filter(|o| o.sign_ok == Some(true)).count() as f64 / runs as f64);
    CellStats {
        method,
        m,
        delta,
        snr_db_mean,
        successes,
        success_rate: successes as f64 / runs as f64,
        sign_rate,
        infeasible: outs.iter().filter(|o| o.infeasible).count(),
        runtime_ms_mean: cfg.timing.then(|| outs.iter().map(|o| o.runtime_ms).sum::<f64>() / runs as f64),
        runs,
        seed: cfg.seed,
    }
}

/// Statistics of a single cell.
pub fn run_cell(cfg: &ExperimentConfig, method: Method, m: usize, delta: f64) -> Result<CellStats> {
    cfg.validate()?;
    let records: Vec<TrialRecord> =
        (0..cfg.runs).into_par_iter().map(|t| run_trial(cfg, m, t, &[delta], &[method])).collect();
    let snrs: Vec<f64> = records.iter().map(|r| r.snr[0]).collect();
    let outs: Vec<TrialOutcome> = records.iter().map(|r| r.outcomes[0][0]).collect();
    Ok(aggregate(cfg, method, m, delta, &snrs, &outs))
}

/// Full grid sweep. Rows are ordered by method, then `m`, then `Δ`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.study != Study::Recovery {
        return Err(Error::InvalidInput("run_experiment expects a recovery study".into()));
    }
    let jobs: Vec<(usize, usize)> = cfg.m_grid.iter().flat_map(|&m| (0..cfg.runs).map(move |t| (m, t))).collect();
    let records: Vec<TrialRecord> =
        jobs.par_iter().map(|&(m, t)| run_trial(cfg, m, t, &cfg.delta_grid, &cfg.methods)).collect();

    let mut cells = Vec::new();
    for (mi, &method) in cfg.methods.iter().enumerate() {
        for (gi, &m) in cfg.m_grid.iter().enumerate() {
            let block = &records[gi * cfg.runs..(gi + 1) * cfg.runs];
            for (di, &delta) in cfg.delta_grid.iter().enumerate() {
                let snrs: Vec<f64> = block.iter().map(|r| r.snr[di]).collect();
                let outs: Vec<TrialOutcome> = block.iter().map(|r| r.outcomes[di][mi]).collect();
                cells.push(aggregate(cfg, method, m, delta, &snrs, &outs));
            }
        }
    }
    let retries: usize = records.iter().map(|r| r.arx_retries).sum();
    let mut provenance = provenance_header(cfg);
    if cfg.ensemble == Ensemble::Arx {
        let _ = writeln!(provenance, "arx_nb = {}", cfg.n - cfg.na);
        let _ = writeln!(provenance, "arx_rejected_draws = {retries}");
    }
    Ok(ExperimentReport { cells, provenance })
}

fn provenance_header(cfg: &ExperimentConfig) -> String {
    let mut s = format!("# eiv-sparse {}\n", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "perturbation = uniform");
    s.push_str(&cfg.to_text());
    s
}

pub fn gamma_study_config(cfg: &ExperimentConfig) -> GammaStudyConfig {
    GammaStudyConfig {
        ensemble: cfg.ensemble,
        n: cfg.n,
        na: cfg.na,
        m_grid: cfg.m_grid.clone(),
        k_grid: cfg.k_grid.clone(),
        runs: cfg.runs,
        entry_std: if cfg.ensemble == Ensemble::Arx { cfg.input_std } else { cfg.entry_std },
        c: cfg.c,
        d: cfg.d,
        system_noise_std: cfg.gamma_system_noise_std,
        seed: cfg.seed,
    }
}

pub fn gamma_csv(cfg: &ExperimentConfig, cells: &[GammaCell]) -> String {
    let mut s = String::from(GAMMA_CSV_HEADER);
    s.push('\n');
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{:.6},{},{},{}",
            cfg.ensemble.as_str(),
            c.m,
            c.k,
            c.gamma_a,
            c.gamma_q,
            c.gamma_qs,
            c.skipped,
            cfg.runs,
            cfg.seed
        );
    }
    s
}

/// Output of a `bench` run: CSV body plus provenance sidecar.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<(String, String)> {
    match cfg.study {
        Study::Recovery => {
            let r = run_experiment(cfg)?;
            Ok((r.to_csv(), r.provenance))
        }
        Study::Gamma => {
            cfg.validate()?;
            let cells = crate::analysis::gamma_study(&gamma_study_config(cfg))?;
            Ok((gamma_csv(cfg, &cells), provenance_header(cfg)))
        }
    }
}

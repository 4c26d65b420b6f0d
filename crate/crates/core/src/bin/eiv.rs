use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eiv_sparse::analysis::{self, ReportOptions};
use eiv_sparse::baselines;
use eiv_sparse::harness::{self, ExperimentConfig, Method};
use eiv_sparse::instance::Instance;
use eiv_sparse::model::{RecoveryResult, RecoveryStatus, Support};
use eiv_sparse::{l2l1_recover, Error};

#[derive(Parser)]
#[command(name = "eiv", version, about = "Sparse recovery from perturbed linear measurements")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a perturbed instance and write it in instance format.
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Row count; defaults to the first entry of the config's m grid.
        #[arg(long)]
        m: Option<usize>,
        /// Perturbation bound; defaults to the first entry of the config's Δ grid.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Recover the sparse vector of an instance file.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "l2l1")]
        method: String,
        /// Polishing threshold; defaults to c/2 when the instance records c.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the Monte Carlo benchmark described by a config file and write CSV.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print theoretical diagnostics for an instance file.
    Diag {
        instance: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        k_hat: Option<usize>,
    },
}

enum Failure {
    Usage(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::InvalidInput(_) | Error::Io(_) | Error::DimensionMismatch(_) | Error::TooLarge { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Solver(other.to_string()),
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    match path {
        None => Ok(ExperimentConfig::gaussian()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            Ok(ExperimentConfig::parse(&text)?)
        }
    }
}

fn one_based(s: &Support) -> String {
    let v: Vec<String> = s.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", v.join(", "))
}

fn vector(v: &[f64]) -> String {
    // values that round to zero print unsigned
    let parts: Vec<String> = v.iter().map(|&x| format!("{:.6}", if x.abs() < 5e-7 { 0.0 } else { x })).collect();
    format!("({})", parts.join(", "))
}

fn cmd_gen(cfg_path: Option<&Path>, out: &Path, seed: Option<u64>, m: Option<usize>, delta: Option<f64>) -> Result<(), Failure> {
    let mut cfg = load_config(cfg_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let m = m.unwrap_or(cfg.m_grid[0]);
    let delta = delta.unwrap_or(cfg.delta_grid[0]);
    if m == 0 || delta.is_nan() || delta < 0.0 {
        return Err(Failure::Usage("need m >= 1 and delta >= 0".into()));
    }
    let inst = harness::trial_instance(&cfg, m, 0)?;
    let (gt, p) = inst.perturbed(delta)?;
    Instance::new(p, Some(gt), Some(cfg.seed)).write(out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn print_result(r: &RecoveryResult) {
    println!("status: {}", r.status.as_str());
    println!("estimate: {}", vector(r.estimate.as_slice()));
    println!("support: {}", one_based(&r.support_estimate));
    println!("objective: {:.6}", r.objective);
    if let Some(s) = &r.signs {
        let v: Vec<String> = s.as_slice().iter().map(|x| format!("{x:+}")).collect();
        println!("signs: ({})", v.join(", "));
    }
}

fn cmd_solve(path: &Path, method: &str, tau: Option<f64>, cfg_path: Option<&Path>) -> Result<(), Failure> {
    let method: Method = method.parse()?;
    let mut cfg = load_config(cfg_path)?;
    let inst = Instance::read(path)?;
    let p = &inst.problem;
    let tau = tau.or(cfg.tau).or_else(|| inst.truth.as_ref().map(|t| t.c / 2.0));
    let tau = tau.ok_or_else(|| Failure::Usage("no polishing threshold: pass --tau or record c in the instance".into()))?;
    cfg.tau = Some(tau);
    let result = match method {
        Method::L2l1 => l2l1_recover(p, &cfg.recovery_config())?,
        Method::OrthantOracle => baselines::orthant_oracle(p, tau, &cfg.lp)?,
        Method::BasisPursuit => baselines::baseline_result(baselines::basis_pursuit(&p.a_bar, &p.y_bar, &cfg.lp)?, tau),
        Method::BpdnInf => {
            let eta = cfg.baseline.bpdn_eta.unwrap_or(p.bound_y);
            baselines::baseline_result(baselines::bpdn_inf(&p.a_bar, &p.y_bar, eta, &cfg.lp)?, tau)
        }
        Method::Lasso => {
            let b = &cfg.baseline;
            let out = match &b.lasso_lambda {
                baselines::LassoLambda::Fixed(l) => baselines::lasso(&p.a_bar, &p.y_bar, *l, b.max_iter, b.step_tol)?,
                baselines::LassoLambda::Grid(g) => baselines::lasso_select(p, g, b.max_iter, b.step_tol)?.0,
            };
            baselines::baseline_result(out.x, tau)
        }
    };
    print_result(&result);
    if result.status != RecoveryStatus::Solved {
        return Err(Failure::Solver(format!("solver finished with status {}", result.status.as_str())));
    }
    Ok(())
}

fn cmd_bench(cfg_path: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg = load_config(Some(cfg_path))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let (csv, provenance) = harness::run_bench(&cfg)?;
    std::fs::write(out, csv).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
    let mut side = out.as_os_str().to_owned();
    side.push(".provenance.txt");
    std::fs::write(&side, provenance).map_err(|e| Failure::Usage(e.to_string()))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_diag(path: &Path, tau: Option<f64>, k_hat: Option<usize>) -> Result<(), Failure> {
    let inst = Instance::read(path)?;
    let p = &inst.problem;
    println!("m = {}, n = {}", p.m(), p.n());
    println!("bound_a = {}, bound_y = {}", p.bound_a, p.bound_y);
    let q = analysis::tight_frame(&p.a_bar)?;
    println!("coherence(A) = {:.6}", analysis::coherence(&p.a_bar)?);
    println!("coherence(Q) = {:.6}", analysis::coherence(&q)?);
    let Some(gt) = &inst.truth else {
        let all: Support = (0..p.n()).collect();
        println!("lemma1_residual = {:.3e}", analysis::lemma1_check(&p.a_bar, &all)?);
        println!("(no ground truth in instance; support-dependent checks skipped)");
        return Ok(());
    };
    let opts = ReportOptions { tau, k_hat, ..ReportOptions::default() };
    let r = analysis::theory_report(gt, p, &opts)?;
    println!("support = {}", one_based(&gt.support));
    println!("k = {}, k_hat = {}, c = {}, d = {}, tau = {}", r.k, r.k_hat, r.c, r.d, r.tau);
    println!("mu_S = {:.6}, mu_Sc = {:.6}", r.mu_s, r.mu_sc);
    println!("gamma = {:.6}", r.gamma);
    println!("phi = {:.6}", r.phi);
    println!("lemma1_residual = {:.3e}", r.lemma1_residual);
    let t1 = &r.theorem1;
    let per: Vec<String> = t1.per_index.iter().map(|(i, h)| format!("{}:{}", i + 1, h)).collect();
    println!("theorem1 ({}, {}) = {} [{}]", t1.cross.as_str(), t1.noise.as_str(), t1.holds, per.join(" "));
    match r.theorem2 {
        (true, Some(xi)) => println!("theorem2 = true (xi = {xi:.6})"),
        _ => println!("theorem2 = false"),
    }
    match r.remark3 {
        (true, Some(w)) => println!("remark3 = true (nu = {:.6}, psi = {:.6})", w.nu, w.psi),
        _ => println!("remark3 = false"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let res = match &cli.cmd {
        Command::Gen { config, out, seed, m, delta } => cmd_gen(config.as_deref(), out, *seed, *m, *delta),
        Command::Solve { instance, method, tau, config } => cmd_solve(instance, method, *tau, config.as_deref()),
        Command::Bench { config, out, seed } => cmd_bench(config, out, *seed),
        Command::Diag { instance, tau, k_hat } => cmd_diag(instance, *tau, *k_hat),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(2)
        }
    }
}

//! The four subcommands, as library calls returning what the binary prints.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::sweep::PLOT_SCRIPT;
use super::{generate, io, read_experiment, run_suite, run_sweep, write_csv, write_experiment, Array, Check, Experiment};
use super::{lambda_max, ExperimentConfig, Suite, SweepOptions, SweepResult};
use crate::cosparse::{certificate, detect_cosupport_in, reduce_to_hj_descent, DEFAULT_EPS_REL};
use crate::error::Result;
use crate::prox::{self, Solution};
use crate::risk::RiskKind;

/// Reads a config file, or a preset when `spec` names one and no such file exists.
pub fn load_config(spec: &str) -> Result<ExperimentConfig> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Ok(cfg) = ExperimentConfig::preset(spec) {
            return Ok(cfg);
        }
    }
    ExperimentConfig::load(path)
}

pub fn cmd_gen(cfg: &ExperimentConfig, out: &Path) -> Result<Experiment> {
    let exp = generate(cfg)?;
    write_experiment(out, cfg, &exp)?;
    Ok(exp)
}

/// What `solve` writes to `solution.txt`.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub lambda: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub polished: bool,
    pub support_size: usize,
    pub cosupport_size: usize,
    pub cospace_dim: usize,
    pub reduced: bool,
    pub cert_inf_norm: Option<f64>,
    pub cert_margin: Option<f64>,
    pub cert_residual: Option<f64>,
    pub cert_valid: bool,
}

impl SolveReport {
    pub fn render(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::new();
        let _ = writeln!(s, "lambda = {}", self.lambda);
        let _ = writeln!(s, "objective = {}", self.objective);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "converged = {}", self.converged);
        let _ = writeln!(s, "polished = {}", self.polished);
        let _ = writeln!(s, "support_size = {}", self.support_size);
        let _ = writeln!(s, "cosupport_size = {}", self.cosupport_size);
        let _ = writeln!(s, "cospace_dim = {}", self.cospace_dim);
        let _ = writeln!(s, "reduced = {}", self.reduced);
        let _ = writeln!(s, "cert_inf_norm = {}", opt(self.cert_inf_norm));
        let _ = writeln!(s, "cert_margin = {}", opt(self.cert_margin));
        let _ = writeln!(s, "cert_residual = {}", opt(self.cert_residual));
        let _ = writeln!(s, "cert_valid = {}", self.cert_valid);
        s
    }
}

pub const X_FILE: &str = "x.raw";
pub const MU_FILE: &str = "mu.raw";
pub const COSUPPORT_FILE: &str = "cosupport.txt";
pub const SOLUTION_FILE: &str = "solution.txt";

/// Solves the problem stored in `dir` at `lambda`. Files are written even
/// when the solver did not converge; the caller decides the exit status.
pub fn cmd_solve(cfg: &ExperimentConfig, dir: &Path, lambda: f64) -> Result<(Solution, SolveReport)> {
    let exp = read_experiment(dir, cfg)?;
    let problem = exp.problem(lambda)?;
    let sol = prox::solve(&problem, &cfg.solver, None)?;
    let shape = exp.x0.shape.clone();
    io::write_array(&dir.join(X_FILE), &Array { shape, data: sol.x.clone() })?;
    io::write_array(&dir.join(MU_FILE), &Array::vector(sol.mu.clone()))?;
    let mut model = detect_cosupport_in(&problem, &sol.x, DEFAULT_EPS_REL)?;
    let mut x = sol.x.clone();
    let mut reduced = false;
    if !model.hj_holds && exp.h0 {
        let (v, m) = reduce_to_hj_descent(&problem, &x, &model)?;
        x = v;
        model = m;
        reduced = true;
    }
    let cert = if lambda > 0.0 {
        let hint: Vec<f64> = model.cosupport.iter().map(|&j| sol.dual[j] / lambda).collect();
        match certificate(&problem, &x, &model, Some(&hint)) {
            Ok(c) => Some(c),
            Err(e) => {
                log::warn!("certificate failed: {e}");
                None
            }
        }
    } else {
        None
    };
    let report = SolveReport {
        lambda,
        objective: sol.objective,
        iterations: sol.iterations,
        converged: sol.converged,
        polished: sol.polished,
        support_size: model.support.len(),
        cosupport_size: model.cosupport.len(),
        cospace_dim: model.dim,
        reduced,
        cert_inf_norm: cert.as_ref().map(|c| c.inf_norm),
        cert_margin: cert.as_ref().map(|c| c.margin),
        cert_residual: cert.as_ref().map(|c| c.residual),
        cert_valid: cert.as_ref().is_some_and(|c| c.is_valid(&problem)),
    };
    let cos: Vec<String> = model.cosupport.iter().map(|j| j.to_string()).collect();
    fs::write(dir.join(COSUPPORT_FILE), cos.join("\n") + "\n")?;
    fs::write(dir.join(SOLUTION_FILE), report.render())?;
    Ok((sol, report))
}

pub const SWEEP_FILE: &str = "sweep.csv";
pub const PLOT_FILE: &str = "plot_sweep.py";

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub experiment: Experiment,
    pub lambda_max: f64,
    pub grid: Vec<f64>,
    pub result: SweepResult,
    pub csv: String,
    /// `λ` minimizing each requested GSURE.
    pub selected: Vec<(RiskKind, f64)>,
    pub csv_path: PathBuf,
}

/// Generates the problem, sweeps the grid and writes `sweep.csv` plus a plotting stub.
pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<SweepSummary> {
    let exp = generate(cfg)?;
    let template = exp.problem(0.0)?;
    let lmax = lambda_max(&template)?;
    let grid = cfg.grid.values(lmax);
    let opts = SweepOptions { solver: cfg.solver, risks: cfg.risks, probes: cfg.probes, seed: cfg.seed, warm_start: true };
    let result = run_sweep(&template, &grid, &opts)?;
    let csv = write_csv(&result.rows);
    fs::create_dir_all(out)?;
    let csv_path = out.join(SWEEP_FILE);
    fs::write(&csv_path, &csv)?;
    fs::write(out.join(PLOT_FILE), PLOT_SCRIPT)?;
    let selected = [RiskKind::Prediction, RiskKind::Projection, RiskKind::Estimation]
        .into_iter()
        .filter(|k| cfg.risks.contains(*k))
        .filter_map(|k| result.argmin_gsure(k).map(|i| (k, grid[i])))
        .collect();
    Ok(SweepSummary { experiment: exp, lambda_max: lmax, grid, result, csv, selected, csv_path })
}

/// Runs a suite and writes `validate-<suite>.txt` when `out` is given.
pub fn cmd_validate(suite: Suite, seed: u64, out: Option<&Path>) -> Result<Vec<Check>> {
    let checks = run_suite(suite, seed);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let text: String = checks.iter().map(|c| format!("{c}\n")).collect();
        fs::write(dir.join(format!("validate-{suite}.txt")), text)?;
    }
    Ok(checks)
}

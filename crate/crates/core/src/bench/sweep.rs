use std::fmt::Write as _;

use crate::error::Result;
use crate::krylov::{cgls_best_effort, KrylovParams};
use crate::linops::LinearOperator;
use crate::prox::{self, Problem, Solution, SolverParams};
use crate::risk::{RiskContext, RiskKind, RiskSelection, TraceMode};
use crate::vecops::{mix_seed, norm_inf};

/// Column order of the sweep CSV.
pub const CSV_HEADER: &str = "lambda,dof,gsure_pred,gsure_proj,gsure_est,se_pred,se_proj,se_est,solver_iters,converged,cert_margin";

const PROBE_SALT: u64 = 0x7072_6f62_65;

/// One grid point. Fields that could not be computed stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub dof: Option<usize>,
    pub gsure_pred: Option<f64>,
    pub gsure_proj: Option<f64>,
    pub gsure_est: Option<f64>,
    pub se_pred: Option<f64>,
    pub se_proj: Option<f64>,
    pub se_est: Option<f64>,
    pub solver_iters: Option<usize>,
    pub converged: bool,
    /// `min_j 1 − |σ_j|`
    pub cert_margin: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(lambda: f64, iters: Option<usize>, err: String) -> Self {
        Self {
            lambda,
            dof: None,
            gsure_pred: None,
            gsure_proj: None,
            gsure_est: None,
            se_pred: None,
            se_proj: None,
            se_est: None,
            solver_iters: iters,
            converged: false,
            cert_margin: None,
            error: Some(err),
        }
    }

    pub fn gsure(&self, kind: RiskKind) -> Option<f64> {
        match kind {
            RiskKind::Prediction => self.gsure_pred,
            RiskKind::Projection => self.gsure_proj,
            RiskKind::Estimation => self.gsure_est,
        }
    }

    pub fn se(&self, kind: RiskKind) -> Option<f64> {
        match kind {
            RiskKind::Prediction => self.se_pred,
            RiskKind::Projection => self.se_proj,
            RiskKind::Estimation => self.se_est,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub solver: SolverParams,
    pub risks: RiskSelection,
    /// MC probes per grid point; `0` selects dense traces.
    pub probes: usize,
    pub seed: u64,
    /// Start each solve from the previous grid point.
    pub warm_start: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { solver: SolverParams::default(), risks: RiskSelection::ALL, probes: 1, seed: 0, warm_start: true }
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Solutions per grid point (`None` on failure), in grid order.
    pub solutions: Vec<Option<Solution>>,
}

impl SweepResult {
    /// Index of the smallest finite entry of a column.
    pub fn argmin_by(&self, column: impl Fn(&SweepRow) -> Option<f64>) -> Option<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| column(r).filter(|v| v.is_finite()).map(|v| (i, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    pub fn argmin_gsure(&self, kind: RiskKind) -> Option<usize> {
        self.argmin_by(|r| r.gsure(kind))
    }

    pub fn argmin_se(&self, kind: RiskKind) -> Option<usize> {
        self.argmin_by(|r| r.se(kind))
    }
}

/// `‖D⁺Φ*y‖∞`, the scale of the default grid.
pub fn lambda_max(problem: &Problem) -> Result<f64> {
    let b = problem.phi.adjoint(&problem.y)?;
    let params = KrylovParams { tol: 1e-10, max_iters: 20 * problem.p().max(problem.n()) + 200 };
    let alpha = cgls_best_effort(problem.dict.base(), &b, &params)?;
    Ok(norm_inf(&alpha.x))
}

/// Solves and evaluates the risks at every `λ` of `grid`, in order.
///
/// Every grid point shares one probe stream, so MC noise in the traces is
/// common to the whole curve. Failures are recorded in the row and the sweep
/// continues; a non-converged solve still gets its risks evaluated and is
/// flagged through `converged`.
pub fn run_sweep(template: &Problem, grid: &[f64], opts: &SweepOptions) -> Result<SweepResult> {
    let sigma = template.sigma.unwrap_or(0.0);
    let mode = if opts.probes == 0 {
        TraceMode::Dense
    } else {
        TraceMode::MonteCarlo { seed: mix_seed(opts.seed, PROBE_SALT), probes: opts.probes }
    };
    let ctx = if sigma > 0.0 { Some(RiskContext::new(&template.phi, &template.dict, sigma * sigma, mode)?) } else { None };
    let mut rows = Vec::with_capacity(grid.len());
    let mut solutions: Vec<Option<Solution>> = Vec::with_capacity(grid.len());
    let mut warm: Option<Solution> = None;
    for &lambda in grid {
        let problem = template.with_lambda(lambda)?;
        let start = if opts.warm_start { warm.as_ref() } else { None };
        let sol = match prox::solve(&problem, &opts.solver, start) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("λ = {lambda}: solver failed: {e}");
                rows.push(SweepRow::failed(lambda, None, e.to_string()));
                solutions.push(None);
                continue;
            }
        };
        let row = match &ctx {
            None => SweepRow {
                solver_iters: Some(sol.iterations),
                converged: sol.converged,
                ..SweepRow::failed(lambda, None, "risks need sigma > 0".into())
            },
            Some(ctx) => match ctx.evaluate(&problem, &sol, opts.risks) {
                Ok(r) => SweepRow {
                    lambda,
                    dof: Some(r.dof),
                    gsure_pred: opts.risks.prediction.then_some(r.gsure_pred),
                    gsure_proj: r.gsure_proj,
                    gsure_est: r.gsure_est,
                    se_pred: r.se_pred.filter(|_| opts.risks.prediction),
                    se_proj: r.se_proj,
                    se_est: r.se_est,
                    solver_iters: Some(sol.iterations),
                    converged: sol.converged,
                    cert_margin: r.cert_margin.is_finite().then_some(r.cert_margin),
                    error: None,
                },
                Err(e) => {
                    log::warn!("λ = {lambda}: risk evaluation failed: {e}");
                    SweepRow { converged: sol.converged, ..SweepRow::failed(lambda, Some(sol.iterations), e.to_string()) }
                }
            },
        };
        rows.push(row);
        warm = Some(sol.clone());
        solutions.push(Some(sol));
    }
    Ok(SweepResult { rows, solutions })
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// CSV text with [`CSV_HEADER`]; missing values are empty fields.
pub fn write_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.lambda,
            opt(&r.dof),
            opt(&r.gsure_pred),
            opt(&r.gsure_proj),
            opt(&r.gsure_est),
            opt(&r.se_pred),
            opt(&r.se_proj),
            opt(&r.se_est),
            opt(&r.solver_iters),
            r.converged,
            opt(&r.cert_margin),
        );
    }
    out
}

/// Plotting helper written next to the CSV.
pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
# Plots GSURE curves against the true risks from sweep.csv.
import csv, sys
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "sweep.csv"
rows = list(csv.DictReader(open(path)))
lam = [float(r["lambda"]) for r in rows]
fig, axes = plt.subplots(1, 3, figsize=(13, 4))
for ax, kind in zip(axes, ["pred", "proj", "est"]):
    for col, style in [("gsure_" + kind, "-"), ("se_" + kind, "--")]:
        pts = [(l, float(r[col])) for l, r in zip(lam, rows) if r[col]]
        if pts:
            ax.plot(*zip(*pts), style, label=col)
    ax.set_xscale("log")
    ax.set_xlabel("lambda")
    ax.legend()
plt.tight_layout()
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=120)
"#;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{DictionarySpec, LinearMap};

    fn tv_problem() -> Problem {
        let x0: Vec<f64> = (0..24).map(|i| if i < 10 { 0.0 } else { 1.0 }).collect();
        let y: Vec<f64> = x0.iter().enumerate().map(|(i, v)| v + 0.05 * ((i * 7 % 5) as f64 - 2.0)).collect();
        Problem::new(y, LinearMap::identity(24), DictionarySpec::finite_diff_1d(24).unwrap(), 0.1)
            .unwrap()
            .with_sigma(0.05)
            .unwrap()
            .with_truth(x0)
            .unwrap()
    }

    #[test]
    fn header_and_empty_fields() {
        let p = tv_problem();
        let res = run_sweep(&p, &[0.05, 0.5], &SweepOptions::default()).unwrap();
        let csv = write_csv(&res.rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 11);
        // Φ = Id: projection equals prediction, estimation is available
        assert!(!first[2].is_empty() && !first[3].is_empty() && !first[4].is_empty());
    }

    #[test]
    fn no_truth_leaves_se_empty() {
        let mut p = tv_problem();
        p.x0 = None;
        let res = run_sweep(&p, &[0.1], &SweepOptions::default()).unwrap();
        let r = &res.rows[0];
        assert!(r.se_pred.is_none() && r.se_proj.is_none() && r.se_est.is_none());
        assert!(r.gsure_pred.is_some());
    }

    #[test]
    fn lambda_max_flattens_tv_denoising() {
        let p = tv_problem();
        let lmax = lambda_max(&p).unwrap();
        let sol = prox::solve(&p.with_lambda(lmax * 1.001).unwrap(), &SolverParams::default(), None).unwrap();
        let spread = sol.x.iter().copied().fold(f64::NEG_INFINITY, f64::max) - sol.x.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-8, "spread {spread}");
    }
}

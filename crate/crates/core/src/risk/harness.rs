use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{RiskContext, RiskReport, RiskSelection, TraceMode};
use crate::error::{Error, Result};
use crate::linops::LinearOperator;
use crate::prox::{solve, Problem, SolverParams};
use crate::vecops::{mean_and_stderr, mix_seed};

#[derive(Debug, Clone, Copy)]
pub struct HarnessOptions {
    pub solver: SolverParams,
    pub risks: RiskSelection,
    /// Trace mode; Monte Carlo seeds are re-mixed with the trial index.
    pub trace: TraceMode,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self { solver: SolverParams::default(), risks: RiskSelection::ALL, trace: TraceMode::Dense }
    }
}

/// Mean of GSURE against mean of the true squared error over trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskStat {
    pub mean_gsure: f64,
    pub mean_se: f64,
    /// Mean of `GSURE − SE`.
    pub diff_mean: f64,
    pub diff_stderr: f64,
    /// `diff_mean / diff_stderr`.
    pub z_score: f64,
    pub trials: usize,
}

impl RiskStat {
    fn from_pairs(pairs: &[(f64, f64)]) -> Option<Self> {
        if pairs.len() < 2 {
            return None;
        }
        let g: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let s: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let d: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
        let (diff_mean, diff_stderr) = mean_and_stderr(&d);
        let diff_stderr = diff_stderr.unwrap_or(f64::NAN);
        Some(Self {
            mean_gsure: mean_and_stderr(&g).0,
            mean_se: mean_and_stderr(&s).0,
            diff_mean,
            diff_stderr,
            z_score: if diff_stderr > 0.0 { diff_mean / diff_stderr } else { 0.0 },
            trials: pairs.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnbiasednessReport {
    pub lambda: f64,
    pub sigma: f64,
    pub trials: usize,
    /// Trials whose solve or risk evaluation failed.
    pub failures: usize,
    pub prediction: Option<RiskStat>,
    pub projection: Option<RiskStat>,
    pub estimation: Option<RiskStat>,
}

/// Draws `y = Φx₀ + w` per trial, solves, and collects the risk report.
fn run_trials(
    template: &Problem,
    ctx: &RiskContext<'_>,
    lambda: f64,
    sigma: f64,
    trials: usize,
    seed: u64,
    opts: &HarnessOptions,
) -> Result<Vec<Option<RiskReport>>> {
    let x0 = template
        .x0
        .as_ref()
        .ok_or_else(|| Error::Precondition("simulation needs the ground truth x0".into()))?;
    let mu0 = template.phi.apply(x0)?;
    let base = template.with_lambda(lambda)?;
    Ok((0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, t as u64));
            let y: Vec<f64> = mu0
                .iter()
                .map(|m| {
                    let w: f64 = StandardNormal.sample(&mut rng);
                    m + sigma * w
                })
                .collect();
            let run = || -> Result<Option<RiskReport>> {
                let problem = base.with_observation(y)?;
                let sol = solve(&problem, &opts.solver, None)?;
                if !sol.converged {
                    return Ok(None);
                }
                let mode = match opts.trace {
                    TraceMode::MonteCarlo { seed: s, probes } => {
                        TraceMode::MonteCarlo { seed: mix_seed(s, t as u64), probes }
                    }
                    m => m,
                };
                ctx.evaluate_with_mode(&problem, &sol, opts.risks, mode).map(Some)
            };
            match run() {
                Ok(r) => r,
                Err(e) => {
                    log::debug!("trial {t} failed: {e}");
                    None
                }
            }
        })
        .collect())
}

/// Monte Carlo check of `E[GSURE] = E[SE]` for each requested risk.
pub fn unbiasedness_mc(
    template: &Problem,
    lambda: f64,
    sigma: f64,
    trials: usize,
    seed: u64,
    opts: &HarnessOptions,
) -> Result<UnbiasednessReport> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
    }
    let ctx = RiskContext::new(&template.phi, &template.dict, sigma * sigma, opts.trace)?;
    let reports = run_trials(template, &ctx, lambda, sigma, trials, seed, opts)?;
    let ok: Vec<&RiskReport> = reports.iter().flatten().collect();
    let pairs = |g: fn(&RiskReport) -> Option<f64>, s: fn(&RiskReport) -> Option<f64>| {
        let v: Vec<(f64, f64)> = ok.iter().filter_map(|r| Some((g(r)?, s(r)?))).collect();
        RiskStat::from_pairs(&v)
    };
    Ok(UnbiasednessReport {
        lambda,
        sigma,
        trials,
        failures: trials - ok.len(),
        prediction: if opts.risks.prediction { pairs(|r| Some(r.gsure_pred), |r| r.se_pred) } else { None },
        projection: if opts.risks.projection { pairs(|r| r.gsure_proj, |r| r.se_proj) } else { None },
        estimation: if opts.risks.estimation { pairs(|r| r.gsure_est, |r| r.se_est) } else { None },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityPoint {
    pub q: usize,
    /// Mean of `((GSURE_Φ − SE_Φ)/(Qσ²))²`.
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// The expected squared deviation `E[(GSURE_Φ − SE_Φ)²]` estimated directly and
/// through `2σ⁴Q + 4σ²E‖Φx₀ − μ★‖² − 4σ⁴E[d]` on independent trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermwiseCheck {
    pub q: usize,
    pub direct: f64,
    pub direct_stderr: f64,
    pub termwise: f64,
    pub termwise_stderr: f64,
    /// `(direct − termwise) / sqrt(se_direct² + se_termwise²)`.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport {
    pub points: Vec<ReliabilityPoint>,
    /// Least-squares slope of `log mean` against `log Q`.
    pub slope: f64,
    pub termwise: TermwiseCheck,
}

/// Relative reliability of the prediction GSURE across problem sizes.
///
/// `build(Q)` returns the template (with `x₀`) for `Q` observations.
pub fn reliability_mc<F>(
    build: F,
    lambda: f64,
    sigma: f64,
    q_list: &[usize],
    trials: usize,
    seed: u64,
    opts: &HarnessOptions,
) -> Result<ReliabilityReport>
where
    F: Fn(usize) -> Result<Problem>,
{
    if q_list.len() < 2 {
        return Err(Error::InvalidArgument("reliability needs at least two sizes".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
    }
    let s2 = sigma * sigma;
    let opts = HarnessOptions { risks: RiskSelection::only(super::RiskKind::Prediction), ..*opts };
    let mut points = Vec::new();
    let mut direct = None;
    let mut termwise = None;
    for (k, &q) in q_list.iter().enumerate() {
        let template = build(q)?;
        let q_obs = template.q() as f64;
        let ctx = RiskContext::new(&template.phi, &template.dict, s2, opts.trace)?;
        let reports = run_trials(&template, &ctx, lambda, sigma, trials, mix_seed(seed, q as u64), &opts)?;
        let dev: Vec<f64> = reports
            .iter()
            .flatten()
            .filter_map(|r| Some(r.gsure_pred - r.se_pred?))
            .collect();
        let rel: Vec<f64> = dev.iter().map(|d| (d / (q_obs * s2)).powi(2)).collect();
        let (mean, stderr) = mean_and_stderr(&rel);
        points.push(ReliabilityPoint { q, mean, stderr: stderr.unwrap_or(f64::NAN), trials: rel.len() });
        if k == 0 {
            let sq: Vec<f64> = dev.iter().map(|d| d * d).collect();
            direct = Some(mean_and_stderr(&sq));
            let other = run_trials(&template, &ctx, lambda, sigma, trials, mix_seed(seed ^ 0x7e57_7e57, q as u64), &opts)?;
            let terms: Vec<f64> = other
                .iter()
                .flatten()
                .filter_map(|r| {
                    Some(2.0 * s2 * s2 * q_obs + 4.0 * s2 * r.se_pred? - 4.0 * s2 * s2 * r.dof as f64)
                })
                .collect();
            termwise = Some(mean_and_stderr(&terms));
        }
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|p| ((p.q as f64).ln(), p.mean.ln())).unzip();
    let slope = fit_slope(&lx, &ly);
    let (d, dse) = direct.expect("first size always evaluated");
    let (t, tse) = termwise.expect("first size always evaluated");
    let (dse, tse) = (dse.unwrap_or(f64::NAN), tse.unwrap_or(f64::NAN));
    let termwise = TermwiseCheck {
        q: q_list[0],
        direct: d,
        direct_stderr: dse,
        termwise: t,
        termwise_stderr: tse,
        z: (d - t) / (dse * dse + tse * tse).sqrt(),
    };
    Ok(ReliabilityReport { points, slope, termwise })
}

/// Ordinary least-squares slope.
pub(crate) fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

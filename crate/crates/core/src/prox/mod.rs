//! Minimizers of `½‖y − Φx‖² + λ‖D*x‖₁`.
//!
//! [`solve_primal_dual`] handles a general `Φ` with a relaxed
//! Arrow–Hurwicz (Chambolle–Pock) iteration on `F(Kx)` with
//! `K = (Φ, D*)`; [`solve_denoising_dual`] handles `Φ = Id` through the
//! box-constrained dual `min ‖y + Dα‖²`, `‖α‖∞ ≤ λ`.
//!
//! Both iterate until a windowed fixed-point test passes and then, when
//! [`SolverParams::polish`] is set, snap the iterate to the exact
//! minimizer on its detected cosupport and certify it.

mod denoise;
mod primal_dual;

pub use denoise::solve_denoising_dual;
pub use primal_dual::{solve_primal_dual, solve_primal_dual_warm};

use crate::error::{check_len, Error, Result};
use crate::krylov::{cg, KrylovParams};
use crate::linops::{DictionarySpec, Gram, LinearMap, LinearOperator};
use crate::vecops::{dist2_sq, norm1};

/// Observation model `y = Φx₀ + w` with its regularization weight.
#[derive(Debug, Clone)]
pub struct Problem {
    pub y: Vec<f64>,
    pub phi: LinearMap,
    pub dict: DictionarySpec,
    pub lambda: f64,
    pub sigma: Option<f64>,
    pub x0: Option<Vec<f64>>,
}

impl Problem {
    pub fn new(y: Vec<f64>, phi: LinearMap, dict: DictionarySpec, lambda: f64) -> Result<Self> {
        check_len("observation length vs Φ rows", phi.rows(), y.len())?;
        check_len("Φ columns vs dictionary", dict.n(), phi.cols())?;
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { y, phi, dict, lambda, sigma: None, x0: None })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
        }
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn with_truth(mut self, x0: Vec<f64>) -> Result<Self> {
        check_len("ground truth", self.n(), x0.len())?;
        self.x0 = Some(x0);
        Ok(self)
    }

    /// Same operators and data, another `λ`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let mut p = self.clone();
        p.lambda = lambda;
        Ok(p)
    }

    /// Same operators and `λ`, another observation.
    pub fn with_observation(&self, y: Vec<f64>) -> Result<Self> {
        check_len("observation length vs Φ rows", self.q(), y.len())?;
        let mut p = self.clone();
        p.y = y;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.phi.cols()
    }

    pub fn q(&self) -> usize {
        self.phi.rows()
    }

    pub fn p(&self) -> usize {
        self.dict.p()
    }

    pub fn is_denoising(&self) -> bool {
        self.phi.kind() == crate::linops::KindTag::Identity
    }

    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        objective(self, x)
    }
}

/// `½‖y − Φx‖² + λ‖D*x‖₁`.
pub fn objective(problem: &Problem, x: &[f64]) -> Result<f64> {
    let mu = problem.phi.apply(x)?;
    let coeffs = problem.dict.analysis().apply(x)?;
    Ok(0.5 * dist2_sq(&problem.y, &mu) + problem.lambda * norm1(&coeffs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub max_iters: usize,
    /// Windowed relative-change tolerance for both `x` and the objective.
    pub tol: f64,
    /// Over-relaxation of the primal extrapolation.
    pub theta: f64,
    /// `τ = s = step_scale / ‖K‖`.
    pub step_scale: f64,
    pub power_iters: usize,
    /// FISTA-style two-step update in the dual denoiser.
    pub accelerated: bool,
    /// Snap to the cosupport-restricted minimizer and certify it.
    pub polish: bool,
    /// Windowed change below which polishing is attempted.
    pub polish_tol: f64,
    pub polish_every: usize,
    /// Relative threshold used for cosupport detection when polishing.
    pub eps_rel: f64,
    /// Record one objective value per iteration in `Solution::history`.
    pub record_history: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_iters: 200_000,
            tol: 1e-10,
            theta: 1.0,
            step_scale: 0.9,
            power_iters: 100,
            accelerated: true,
            polish: true,
            polish_tol: 1e-5,
            polish_every: 100,
            eps_rel: 1e-5,
            record_history: false,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidArgument(format!("theta must be in [0, 1], got {}", self.theta)));
        }
        if !(self.step_scale > 0.0 && self.step_scale < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "step_scale must be in (0, 1), got {}",
                self.step_scale
            )));
        }
        if self.power_iters == 0 {
            return Err(Error::InvalidArgument("power_iters must be >= 1".into()));
        }
        Ok(())
    }

    /// Plain (unaccelerated, unpolished) iteration.
    pub fn raw() -> Self {
        Self { accelerated: false, polish: false, ..Self::default() }
    }
}

/// Stopping window, in iterations.
pub(crate) const WINDOW: usize = 10;

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    /// `Φx`
    pub mu: Vec<f64>,
    /// `D*x`
    pub coeffs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Windowed relative change of `x` at exit; for polished solutions the
    /// relative first-order residual of the certificate.
    pub primal_residual: f64,
    pub converged: bool,
    pub polished: bool,
    /// Analysis-side dual variable `u`, `‖u‖∞ ≤ λ`, with `Φ*(Φx − y) + Du ≈ 0`.
    pub dual: Vec<f64>,
    /// Observation-side dual variable (`≈ Φx − y`), kept for warm starts.
    pub dual_obs: Vec<f64>,
    pub history: Vec<f64>,
}

impl Solution {
    /// Builds a solution record from a primal point; objective and images are recomputed.
    pub fn from_point(problem: &Problem, x: Vec<f64>, dual: Vec<f64>) -> Result<Self> {
        let mu = problem.phi.apply(&x)?;
        let coeffs = problem.dict.analysis().apply(&x)?;
        let objective = 0.5 * dist2_sq(&problem.y, &mu) + problem.lambda * norm1(&coeffs);
        let dual_obs = mu.iter().zip(&problem.y).map(|(m, y)| m - y).collect();
        Ok(Self {
            x,
            mu,
            coeffs,
            objective,
            iterations: 0,
            primal_residual: 0.0,
            converged: true,
            polished: false,
            dual,
            dual_obs,
            history: Vec::new(),
        })
    }
}

/// Dispatches to the dual denoiser when `Φ = Id` and to the primal-dual
/// scheme otherwise, optionally warm-started from `warm`.
pub fn solve(problem: &Problem, params: &SolverParams, warm: Option<&Solution>) -> Result<Solution> {
    if problem.is_denoising() && problem.lambda > 0.0 {
        let alpha0: Option<Vec<f64>> = warm.filter(|w| w.dual.len() == problem.p()).map(|w| w.dual.iter().map(|u| -u).collect());
        denoise::solve_denoising_dual_from(&problem.y, &problem.dict, problem.lambda, params, alpha0)
    } else {
        solve_primal_dual_warm(problem, params, warm)
    }
}

/// Componentwise soft-thresholding `sign(v)·max(|v| − t, 0)`.
pub fn prox_l1(v: &[f64], t: f64) -> Vec<f64> {
    v.iter().map(|&x| x.signum() * (x.abs() - t).max(0.0)).collect()
}

/// Projection onto `{‖u‖∞ ≤ radius}`.
pub fn project_inf_ball(v: &[f64], radius: f64) -> Vec<f64> {
    v.iter().map(|&x| x.clamp(-radius, radius)).collect()
}

/// `λ = 0`: plain least squares by CG on `Φ*Φ`.
pub fn solve_least_squares(problem: &Problem, params: &KrylovParams) -> Result<Solution> {
    let rhs = problem.phi.adjoint(&problem.y)?;
    let sol = cg(&Gram::new(&problem.phi), &rhs, params)?;
    let mut out = Solution::from_point(problem, sol.x, vec![0.0; problem.p()])?;
    out.iterations = sol.iterations;
    out.primal_residual = sol.residual;
    Ok(out)
}

/// Polish attempts back off geometrically after each failure.
pub(crate) struct PolishSchedule {
    next: usize,
    gap: usize,
    max_gap: usize,
}

impl PolishSchedule {
    pub(crate) fn new(params: &SolverParams) -> Self {
        let gap = params.polish_every.max(WINDOW);
        Self { next: gap, gap, max_gap: 32 * gap }
    }

    pub(crate) fn due(&self, it: usize) -> bool {
        it >= self.next
    }

    pub(crate) fn failed(&mut self, it: usize) {
        self.gap = (2 * self.gap).min(self.max_gap);
        self.next = it + self.gap;
    }
}

pub(crate) fn attempt_polish(problem: &Problem, x: &[f64], dual: &[f64], params: &SolverParams) -> Option<Solution> {
    match crate::cosparse::polish(problem, x, Some(dual), params.eps_rel) {
        Ok(Some(p)) => {
            let mut s = Solution::from_point(problem, p.x, p.dual).ok()?;
            s.polished = true;
            s.primal_residual = p.certificate.residual / (problem.lambda * problem.dict.norm()).max(f64::MIN_POSITIVE);
            Some(s)
        }
        Ok(None) => None,
        Err(e) => {
            log::debug!("polishing skipped: {e}");
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(prox_l1(&[3.0, 0.5, -2.0], 1.0), vec![2.0, 0.0, -1.0]);
        assert_eq!(prox_l1(&[3.0, 0.5, -2.0], 3.0), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn objective_examples() {
        let p = Problem::new(vec![3.0, 0.5, -2.0], LinearMap::identity(3), DictionarySpec::identity(3), 1.0).unwrap();
        assert!((objective(&p, &[2.0, 0.0, -1.0]).unwrap() - 4.125).abs() < 1e-15);
        assert!((objective(&p, &[0.0; 3]).unwrap() - 0.5 * (9.0 + 0.25 + 4.0)).abs() < 1e-15);
        assert!(objective(&p, &[0.0; 2]).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(SolverParams::default().validate().is_ok());
        assert!(SolverParams { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverParams { theta: 1.5, ..Default::default() }.validate().is_err());
        assert!(SolverParams { step_scale: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn problem_rejects_bad_dims() {
        assert!(Problem::new(vec![1.0; 2], LinearMap::identity(3), DictionarySpec::identity(3), 1.0).is_err());
        assert!(Problem::new(vec![1.0; 3], LinearMap::identity(3), DictionarySpec::identity(3), -1.0).is_err());
    }
}

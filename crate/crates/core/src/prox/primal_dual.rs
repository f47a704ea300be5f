use super::{attempt_polish, PolishSchedule, solve_least_squares, Problem, Solution, SolverParams, WINDOW};
use crate::error::{Error, Result};
use crate::krylov::KrylovParams;
use crate::linops::{operator_norm, LinearMap, LinearOperator};
use crate::vecops::{all_finite, dist2, dist2_sq, norm1, norm2};

/// `K = (Φ; D*)`.
struct Stacked<'a> {
    phi: &'a LinearMap,
    analysis: &'a LinearMap,
}

impl LinearOperator for Stacked<'_> {
    fn rows(&self) -> usize {
        self.phi.rows() + self.analysis.rows()
    }
    fn cols(&self) -> usize {
        self.phi.cols()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (a, b) = out.split_at_mut(self.phi.rows());
        self.phi.apply_into(x, a);
        self.analysis.apply_into(x, b);
    }
    fn adjoint_into(&self, u: &[f64], out: &mut [f64]) {
        let (a, b) = u.split_at(self.phi.rows());
        let mut tmp = vec![0.0; out.len()];
        self.phi.adjoint_into(a, out);
        self.analysis.adjoint_into(b, &mut tmp);
        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
    }
}

pub fn solve_primal_dual(problem: &Problem, params: &SolverParams) -> Result<Solution> {
    solve_primal_dual_warm(problem, params, None)
}

/// Primal-dual iteration optionally started from a previous solution
/// (typically the neighbouring grid point of a `λ` sweep).
pub fn solve_primal_dual_warm(problem: &Problem, params: &SolverParams, warm: Option<&Solution>) -> Result<Solution> {
    params.validate()?;
    if problem.lambda == 0.0 {
        return solve_least_squares(problem, &KrylovParams::default());
    }
    let phi = &problem.phi;
    let analysis = problem.dict.analysis();
    let base = problem.dict.base();
    let lambda = problem.lambda;
    let (n, q, p) = (problem.n(), problem.q(), problem.p());

    let k = Stacked { phi, analysis };
    let norm_k = operator_norm(&k, params.power_iters).max(f64::MIN_POSITIVE);
    let tau = params.step_scale / norm_k;
    let s = params.step_scale / norm_k;

    let (mut x, mut dual_obs, mut u) = match warm {
        Some(w) if w.x.len() == n && w.dual_obs.len() == q && w.dual.len() == p => (
            w.x.clone(),
            w.dual_obs.clone(),
            w.dual.iter().map(|v| v.clamp(-lambda, lambda)).collect(),
        ),
        _ => (vec![0.0; n], vec![0.0; q], vec![0.0; p]),
    };
    let mut xbar = x.clone();
    let mut gq = vec![0.0; q];
    let mut gu = vec![0.0; p];
    let mut kt = vec![0.0; n];
    let mut du = vec![0.0; n];
    let objective_at = |x: &[f64], mu: &mut [f64], c: &mut [f64]| {
        phi.apply_into(x, mu);
        analysis.apply_into(x, c);
        0.5 * dist2_sq(&problem.y, mu) + lambda * norm1(c)
    };

    let mut history = Vec::new();
    let mut x_ref = x.clone();
    let mut obj_ref = objective_at(&x, &mut gq, &mut gu);
    let mut rel_change = f64::INFINITY;
    let mut converged = false;
    let mut schedule = PolishSchedule::new(params);
    let mut iterations = 0;

    for it in 1..=params.max_iters {
        iterations = it;
        phi.apply_into(&xbar, &mut gq);
        analysis.apply_into(&xbar, &mut gu);
        for ((d, g), y) in dual_obs.iter_mut().zip(&gq).zip(&problem.y) {
            *d = (*d + s * g - s * y) / (1.0 + s);
        }
        for (ui, g) in u.iter_mut().zip(&gu) {
            *ui = (*ui + s * g).clamp(-lambda, lambda);
        }
        phi.adjoint_into(&dual_obs, &mut kt);
        base.apply_into(&u, &mut du);
        for i in 0..n {
            let xn = x[i] - tau * (kt[i] + du[i]);
            xbar[i] = xn + params.theta * (xn - x[i]);
            x[i] = xn;
        }
        if params.record_history {
            history.push(objective_at(&x, &mut gq, &mut gu));
        }
        if it % WINDOW == 0 {
            if !all_finite(&x) {
                return Err(Error::NumericalFailure(format!("non-finite iterate at iteration {it}")));
            }
            let obj = objective_at(&x, &mut gq, &mut gu);
            rel_change = dist2(&x, &x_ref) / norm2(&x).max(f64::MIN_POSITIVE);
            let rel_obj = (obj - obj_ref).abs() / obj.abs().max(f64::MIN_POSITIVE);
            x_ref.copy_from_slice(&x);
            obj_ref = obj;
            if rel_change <= params.tol && rel_obj <= params.tol {
                converged = true;
                break;
            }
            if params.polish && rel_change <= params.polish_tol && schedule.due(it) {
                if let Some(mut sol) = attempt_polish(problem, &x, &u, params) {
                    sol.iterations = it;
                    sol.dual_obs = dual_obs;
                    sol.history = history;
                    return Ok(sol);
                }
                schedule.failed(it);
            }
        }
    }

    if params.polish {
        if let Some(mut sol) = attempt_polish(problem, &x, &u, params) {
            sol.iterations = iterations;
            sol.dual_obs = dual_obs;
            sol.history = history;
            return Ok(sol);
        }
    }
    let mut sol = Solution::from_point(problem, x, u)?;
    sol.iterations = iterations;
    sol.primal_residual = rel_change;
    sol.converged = converged;
    sol.dual_obs = dual_obs;
    sol.history = history;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::DictionarySpec;

    #[test]
    fn soft_threshold_case() {
        let p = Problem::new(vec![3.0, 0.5, -2.0], LinearMap::identity(3), DictionarySpec::identity(3), 1.0).unwrap();
        let s = solve_primal_dual(&p, &SolverParams::default()).unwrap();
        assert!(s.converged);
        for (a, b) in s.x.iter().zip(&[2.0, 0.0, -1.0]) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_signal_is_fixed_by_tv() {
        let dict = DictionarySpec::finite_diff_1d(8).unwrap();
        let p = Problem::new(vec![1.5; 8], LinearMap::identity(8), dict, 0.7).unwrap();
        let s = solve_primal_dual(&p, &SolverParams::default()).unwrap();
        assert!(s.x.iter().all(|v| (v - 1.5).abs() < 1e-9));
    }

    #[test]
    fn raw_iteration_converges_without_polish() {
        let p = Problem::new(vec![3.0, 0.5, -2.0], LinearMap::identity(3), DictionarySpec::identity(3), 1.0).unwrap();
        let s = solve_primal_dual(&p, &SolverParams { polish: false, ..Default::default() }).unwrap();
        assert!(s.converged && !s.polished);
        assert!((s.x[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn reports_non_convergence() {
        let p = Problem::new(vec![3.0, 0.5, -2.0], LinearMap::identity(3), DictionarySpec::identity(3), 1.0).unwrap();
        let s = solve_primal_dual(&p, &SolverParams { max_iters: 3, polish: false, ..Default::default() }).unwrap();
        assert!(!s.converged);
    }
}

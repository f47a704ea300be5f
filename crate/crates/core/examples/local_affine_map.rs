// The solution is locally affine in (y, lambda): compare the affine map and its Jacobian with re-solves.
use l1analysis::cosparse::{detect_cosupport, prediction_jacobian, LocalAffineMap, DEFAULT_EPS_REL};
use l1analysis::prox::solve;
use l1analysis::vecops::max_abs_diff;
use l1analysis::{DictionarySpec, LinearMap, Problem, Result, SolverParams};

pub fn run_example() -> Result<()> {
    let n = 20;
    let y: Vec<f64> = (0..n).map(|i| (i / 5) as f64 * 0.4 + 0.03 * ((i * 13 % 7) as f64 - 3.0)).collect();
    let problem = Problem::new(y.clone(), LinearMap::identity(n), DictionarySpec::finite_diff_1d(n)?, 0.1)?;
    let params = SolverParams::default();
    let sol = solve(&problem, &params, None)?;
    let model = detect_cosupport(&problem.phi, &problem.dict, &sol.x, DEFAULT_EPS_REL)?;
    let map = LocalAffineMap::new(&problem.phi, &problem.dict, &model)?;

    let at_y = map.eval(&y, problem.lambda)?;
    println!("affine map at (y, lambda) vs solver: {:.1e}", max_abs_diff(&at_y, &sol.x));

    let y_bar: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + 1e-4 * ((i % 3) as f64 - 1.0)).collect();
    let lambda_bar = problem.lambda * 1.001;
    let predicted = map.eval(&y_bar, lambda_bar)?;
    let resolved = solve(&problem.with_observation(y_bar)?.with_lambda(lambda_bar)?, &params, None)?;
    println!("affine map at perturbed point vs re-solve: {:.1e}", max_abs_diff(&predicted, &resolved.x));

    let jac = prediction_jacobian(&problem.phi, &problem.dict, &model.cosupport)?;
    println!("trace of d(mu)/dy = {:.10}, dim G_J = {}", jac.trace(), model.dim);
    assert!((jac.trace() - model.dim as f64).abs() < 1e-8);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}

// Exact solution of a tiny instance by enumerating sign patterns, compared with the iterative solver.
use l1analysis::cosparse::enumerate_exact_solve;
use l1analysis::prox::solve_primal_dual;
use l1analysis::vecops::max_abs_diff;
use l1analysis::{DictionarySpec, LinearMap, Problem, Result, SolverParams};
use nalgebra::DMatrix;

pub fn run_example() -> Result<()> {
    let phi = DMatrix::from_row_slice(3, 4, &[1.0, 0.5, 0.0, -0.2, 0.0, 1.0, 0.3, 0.1, 0.2, 0.0, 1.0, 0.7]);
    let dstar = DMatrix::from_row_slice(3, 4, &[1.0, -1.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 1.0, -1.0]);
    let y = vec![1.0, -0.4, 0.8];
    let problem = Problem::new(y, LinearMap::dense(phi), DictionarySpec::dense_analysis(dstar), 0.3)?;

    let exact = enumerate_exact_solve(&problem)?;
    let iterative = solve_primal_dual(&problem, &SolverParams::default())?;
    println!("exact      x = {:.6?}  objective {:.10}", exact.x, exact.objective);
    println!("iterative  x = {:.6?}  objective {:.10}", iterative.x, iterative.objective);
    let dmu = max_abs_diff(&exact.mu, &iterative.mu);
    println!("max |mu_exact - mu_iter| = {dmu:.1e}");
    assert!(dmu < 1e-6);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}

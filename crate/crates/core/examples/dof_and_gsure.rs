// DOF estimate and the three GSURE risks at one solution, against the squared errors they estimate.
use l1analysis::bench::signals::{blocks, gaussian_noise};
use l1analysis::prox::solve;
use l1analysis::risk::{RiskContext, RiskSelection, TraceMode};
use l1analysis::{DictionarySpec, LinearMap, LinearOperator, Problem, Result, SolverParams};

pub fn run_example() -> Result<()> {
    let n = 64;
    let sigma = 0.1;
    let x0 = blocks(n, 5, 2)?;
    // Blurring keeps Phi invertible, so all three risks are defined.
    let phi = LinearMap::circular_conv(vec![0.1, 0.8, 0.1], n)?;
    let noise = gaussian_noise(n, 9);
    let y: Vec<f64> = phi.apply(&x0)?.iter().zip(&noise).map(|(m, w)| m + sigma * w).collect();
    let problem = Problem::new(y, phi, DictionarySpec::finite_diff_1d(n)?, 0.05)?.with_truth(x0)?;

    let sol = solve(&problem, &SolverParams::default(), None)?;
    let ctx = RiskContext::new(&problem.phi, &problem.dict, sigma * sigma, TraceMode::Dense)?;
    let r = ctx.evaluate(&problem, &sol, RiskSelection::ALL)?;
    println!("dof = dim G_J = {}", r.dof);
    println!("{:<12} {:>10} {:>10}", "risk", "GSURE", "true SE");
    println!("{:<12} {:>10.4} {:>10.4}", "prediction", r.gsure_pred, r.se_pred.unwrap_or(f64::NAN));
    println!("{:<12} {:>10.4} {:>10.4}", "projection", r.gsure_proj.unwrap_or(f64::NAN), r.se_proj.unwrap_or(f64::NAN));
    println!("{:<12} {:>10.4} {:>10.4}", "estimation", r.gsure_est.unwrap_or(f64::NAN), r.se_est.unwrap_or(f64::NAN));
    println!("certificate margin {:.4}", r.cert_margin);
    assert!(r.gsure_est.is_some());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}

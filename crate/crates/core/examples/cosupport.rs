// Cosupport detection, cospace dimension and the dual certificate of a TV solution.
use l1analysis::cosparse::{certificate, check_h0, cospace_dim, detect_cosupport, DEFAULT_EPS_REL};
use l1analysis::prox::solve;
use l1analysis::{DictionarySpec, LinearMap, Problem, Result, SolverParams};

pub fn run_example() -> Result<()> {
    let n = 16;
    let y: Vec<f64> = (0..n).map(|i| if i < 5 { 0.0 } else if i < 11 { 1.0 } else { 0.3 } + 0.05 * ((i * 7 % 5) as f64 - 2.0)).collect();
    let phi = LinearMap::identity(n);
    let dict = DictionarySpec::finite_diff_1d(n)?;
    println!("(H0) holds: {}", check_h0(&phi, &dict)?);

    let problem = Problem::new(y, phi, dict, 0.15)?;
    let sol = solve(&problem, &SolverParams::default(), None)?;
    let model = detect_cosupport(&problem.phi, &problem.dict, &sol.x, DEFAULT_EPS_REL)?;
    println!("support I = {:?}, signs {:?}", model.support, model.signs);
    println!("|J| = {}, dim G_J = {} (pieces of the solution)", model.cosupport.len(), model.dim);
    assert_eq!(model.dim, cospace_dim(&problem.dict, &model.cosupport)?);
    assert_eq!(model.dim, model.support_size() + 1);

    let hint: Vec<f64> = model.cosupport.iter().map(|&j| sol.dual[j] / problem.lambda).collect();
    let cert = certificate(&problem, &sol.x, &model, Some(&hint))?;
    println!("||sigma||_inf = {:.6}, margin {:.6}, residual {:.1e}", cert.inf_norm, cert.margin, cert.residual);
    assert!(cert.is_valid(&problem));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}

// Monte Carlo check that GSURE is unbiased for the squared error it targets.
use l1analysis::risk::{unbiasedness_mc, HarnessOptions, RiskStat};
use l1analysis::{DictionarySpec, LinearMap, LinearOperator, Problem, Result};

fn line(name: &str, s: Option<RiskStat>) {
    if let Some(s) = s {
        println!("{name:<12} E[GSURE] {:>9.4}  E[SE] {:>9.4}  z = {:>6.2}", s.mean_gsure, s.mean_se, s.z_score);
    }
}

pub fn run_example() -> Result<()> {
    let n = 32;
    let x0: Vec<f64> = (0..n).map(|i| [0.2, 1.0, -0.5, 0.4][i * 4 / n]).collect();
    let phi = LinearMap::partial_dct(16, n, 2)?;
    let y = phi.apply(&x0)?;
    let template = Problem::new(y, phi, DictionarySpec::finite_diff_1d(n)?, 0.05)?.with_truth(x0)?;
    let trials = 200;
    let report = unbiasedness_mc(&template, 0.05, 0.1, trials, 1, &HarnessOptions::default())?;
    println!("{trials} trials, {} failed", report.failures);
    line("prediction", report.prediction);
    line("projection", report.projection);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}

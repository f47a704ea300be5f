// 1-D total-variation denoising of a piecewise-constant signal with the dual solver.
use l1analysis::bench::signals::{blocks, gaussian_noise};
use l1analysis::prox::solve_denoising_dual;
use l1analysis::vecops::dist2;
use l1analysis::{DictionarySpec, Result, SolverParams};

pub fn run_example() -> Result<()> {
    let n = 128;
    let x0 = blocks(n, 6, 3)?;
    let sigma = 0.1;
    let noise = gaussian_noise(n, 42);
    let y: Vec<f64> = x0.iter().zip(&noise).map(|(x, w)| x + sigma * w).collect();
    let dict = DictionarySpec::finite_diff_1d(n)?;

    println!("{:>8} {:>10} {:>8} {:>6} {:>9}", "lambda", "||x-x0||", "jumps", "iters", "polished");
    for lambda in [0.02, 0.1, 0.3, 1.0] {
        let sol = solve_denoising_dual(&y, &dict, lambda, &SolverParams::default())?;
        let jumps = sol.coeffs.iter().filter(|c| c.abs() > 1e-8).count();
        println!("{lambda:>8} {:>10.4} {jumps:>8} {:>6} {:>9}", dist2(&sol.x, &x0), sol.iterations, sol.polished);
        assert!(sol.converged);
    }
    println!("noisy input error {:.4}", dist2(&y, &x0));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}

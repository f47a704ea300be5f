// Sweeps lambda on a small compressed-sensing problem, picks it by GSURE and writes the CSV.
use l1analysis::bench::{generate, lambda_max, run_sweep, write_csv, ExperimentConfig, SignalSource, SweepOptions};
use l1analysis::risk::RiskKind;
use l1analysis::Result;

pub fn run_example() -> Result<()> {
    let mut cfg = ExperimentConfig::compressed_sensing();
    cfg.signal = SignalSource::Blocks { n: 64, pieces: 4, seed: 0 };
    cfg.operator = l1analysis::bench::OperatorSpec::PartialDct { q: 32, seed: 2 };
    cfg.dictionary = l1analysis::bench::DictionaryChoice::FiniteDiff1d;
    cfg.grid.count = 12;
    let exp = generate(&cfg)?;
    // the row selection must keep the DC row, otherwise constants are invisible
    assert!(exp.h0, "Ker Phi and Ker D* intersect for this seed");
    let template = exp.problem(1.0)?;
    let lmax = lambda_max(&template)?;
    let grid = cfg.grid.values(lmax);
    let opts = SweepOptions { probes: 0, ..SweepOptions::default() };
    let result = run_sweep(&template, &grid, &opts)?;

    print!("{}", write_csv(&result.rows));
    for row in result.rows.iter().filter(|r| r.error.is_some()) {
        println!("lambda {:.4e} failed: {}", row.lambda, row.error.as_deref().unwrap_or(""));
    }
    for kind in [RiskKind::Prediction, RiskKind::Projection] {
        if let (Some(g), Some(s)) = (result.argmin_gsure(kind), result.argmin_se(kind)) {
            println!("{kind}: GSURE picks lambda {:.4e}, oracle picks {:.4e}", grid[g], grid[s]);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}

// Runs the built-in operator and local-map validation checks.
use l1analysis::bench::{run_suite, Suite};
use l1analysis::Result;

pub fn run_example() -> Result<()> {
    let mut failed = 0;
    for suite in [Suite::Operators, Suite::LocalMaps] {
        println!("[{suite}]");
        for check in run_suite(suite, 0) {
            println!("  {check}");
            failed += usize::from(!check.passed);
        }
    }
    assert_eq!(failed, 0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}

// Monte Carlo estimate of tr(A^[J]) through the saddle-point system, against the dense trace.
use l1analysis::bench::signals::blocks;
use l1analysis::cosparse::{detect_cosupport, DenseCospace, DEFAULT_EPS_REL};
use l1analysis::krylov::KrylovParams;
use l1analysis::risk::{mc_trace, ProbeSide, ProbeStream};
use l1analysis::{DictionarySpec, LinearMap, Result};

pub fn run_example() -> Result<()> {
    let n = 48;
    let phi = LinearMap::circular_conv(vec![0.25, 0.5, 0.25], n)?;
    let dict = DictionarySpec::finite_diff_1d(n)?;
    let x = blocks(n, 6, 4)?;
    let model = detect_cosupport(&phi, &dict, &x, DEFAULT_EPS_REL)?;
    let exact = DenseCospace::new(&phi, &dict, &model.cosupport)?.trace()?;
    println!("dense tr(A^[J]) = {exact:.6}");

    let params = KrylovParams::default();
    println!("{:>7} {:>12} {:>10} {:>8}", "probes", "estimate", "stderr", "|z|");
    for k in [10, 100, 1000] {
        let stream = ProbeStream::new(3, k, n);
        let est = mc_trace(&phi, &dict, &model.cosupport, ProbeSide::Estimation, &stream, &params)?;
        let se = est.stderr.unwrap_or(f64::NAN);
        println!("{k:>7} {:>12.6} {se:>10.6} {:>8.2}", est.value, ((est.value - exact) / se).abs());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}

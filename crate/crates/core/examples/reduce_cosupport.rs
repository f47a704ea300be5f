// When Phi is not injective on the cospace, reduce the cosupport to one where it is.
use l1analysis::cosparse::{detect_cosupport, reduce_to_hj};
use l1analysis::{DictionarySpec, LinearMap, LinearOperator, Problem, Result};
use nalgebra::DMatrix;

pub fn run_example() -> Result<()> {
    // One measurement of x1 + x2 with an l1 penalty: every point on the segment
    // between (1.5, 0) and (0, 1.5) is a minimizer.
    let phi = LinearMap::dense(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
    let problem = Problem::new(vec![2.0], phi, DictionarySpec::identity(2), 0.5)?;
    let x = vec![0.75, 0.75];
    let model = detect_cosupport(&problem.phi, &problem.dict, &x, 1e-8)?;
    println!("before: support {:?}, dim G_J {}, (H_J) {}", model.support, model.dim, model.hj_holds);

    let (v, reduced) = reduce_to_hj(&problem, &x, &model)?;
    println!("after:  x = {:?}, support {:?}, dim G_J {}, (H_J) {}", v, reduced.support, reduced.dim, reduced.hj_holds);
    let mu_before = problem.phi.apply(&x)?;
    let mu_after = problem.phi.apply(&v)?;
    println!("Phi x unchanged: {:?} -> {:?}", mu_before, mu_after);
    println!("objective {:.12} -> {:.12}", problem.objective(&x)?, problem.objective(&v)?);
    assert!(reduced.hj_holds);
    assert!((mu_before[0] - mu_after[0]).abs() < 1e-10);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}

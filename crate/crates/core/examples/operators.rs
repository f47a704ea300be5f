// Builds each forward operator and analysis dictionary and checks the adjoint identity.
use l1analysis::linops::{adjoint_mismatch, operator_norm};
use l1analysis::{DictionarySpec, LinearMap, LinearOperator, Result};

pub fn run_example() -> Result<()> {
    let n = 64;
    let ops = [
        ("identity", LinearMap::identity(n)),
        ("subsample x2", LinearMap::subsample(n, 2)?),
        ("partial DCT 24/64", LinearMap::partial_dct(24, n, 1)?),
        ("circular blur", LinearMap::circular_conv(vec![0.25, 0.5, 0.25], n)?),
        ("vertical subsample 8x8", LinearMap::subsample_rows_2d(8, 8, 2)?),
    ];
    for (name, op) in &ops {
        let mismatch = adjoint_mismatch(op, 8, 7);
        println!("{name:<24} {}x{}  |<Ax,y> - <x,A*y>| = {mismatch:.1e}", op.rows(), op.cols());
        assert!(mismatch <= 1e-12);
    }

    let dicts = [
        ("1-D TV", DictionarySpec::finite_diff_1d(n)?),
        ("2-D TV 8x8", DictionarySpec::finite_diff_2d(8, 8)?),
        ("Haar, 3 levels", DictionarySpec::haar_shift_invariant(n, 3)?),
    ];
    for (name, d) in &dicts {
        let mismatch = adjoint_mismatch(d.analysis(), 8, 11);
        println!("{name:<24} P = {:<4} ||D|| = {:.4}  adjoint mismatch {mismatch:.1e}", d.p(), d.norm());
        assert!(mismatch <= 1e-12);
    }

    // Rows of a partial DCT are orthonormal, so its norm is one.
    let dct = LinearMap::partial_dct(24, n, 1)?;
    let norm = operator_norm(&dct, 200);
    println!("partial DCT operator norm {norm:.6}");
    assert!((norm - 1.0).abs() < 1e-6);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}

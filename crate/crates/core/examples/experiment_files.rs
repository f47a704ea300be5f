// Config text, generated data on disk, and a solve from those files.
use l1analysis::bench::commands::{cmd_gen, cmd_solve};
use l1analysis::bench::io::{decode_raw, encode_raw, RawDtype};
use l1analysis::bench::{Array, ExperimentConfig};
use l1analysis::Result;

const CONFIG: &str = "
# small 1-D denoising experiment
name = tiny-tv
operator = identity
dictionary = tv1d
signal = blocks
n = 48
pieces = 4
signal_seed = 7
sigma = 0.05
lambda_count = 8
";

pub fn run_example() -> Result<()> {
    let cfg: ExperimentConfig = CONFIG.parse()?;
    println!("parsed config:\n{cfg}");
    let dir = std::env::temp_dir().join(format!("l1analysis-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let exp = cmd_gen(&cfg, &dir)?;
    println!("wrote x0/y to {} (sigma {:.4}, psnr {:.2} dB)", dir.display(), exp.sigma, exp.psnr);
    let (sol, report) = cmd_solve(&cfg, &dir, 0.05)?;
    print!("{}", report.render());
    println!("solution has {} samples", sol.x.len());

    let bytes = encode_raw(&Array::vector(vec![1.0, -2.5, 3.25]), RawDtype::F32);
    let back = decode_raw(&bytes)?;
    println!("f32 raw roundtrip: {:?}", back.data);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}

//! Experiment layer behind the `l1analysis` binary: configs, synthetic
//! data, file formats, λ sweeps and validation suites.

pub mod commands;
pub mod config;
pub mod io;
pub mod signals;
pub mod sweep;
pub mod validate;

use std::fs;
use std::path::Path;

pub use config::{DictionaryChoice, ExperimentConfig, GridSpacing, LambdaGrid, NoiseSpec, OperatorSpec, SignalSource};
pub use io::Array;
pub use sweep::{lambda_max, run_sweep, write_csv, SweepOptions, SweepResult, SweepRow, CSV_HEADER};
pub use validate::{run_suite, Check, Suite};

use crate::cosparse::check_h0;
use crate::error::{Error, Result};
use crate::linops::{DictionarySpec, LinearMap, LinearOperator};
use crate::prox::Problem;
use crate::vecops::mix_seed;

/// Salt mixed into the experiment seed for the noise draw.
const NOISE_SALT: u64 = 0x6e6f_6973_65;

/// Measurement operator for a signal of the given shape.
pub fn build_operator(spec: &OperatorSpec, shape: &[usize]) -> Result<LinearMap> {
    let n: usize = shape.iter().product();
    match spec {
        OperatorSpec::Identity => Ok(LinearMap::identity(n)),
        OperatorSpec::PartialDct { q, seed } => LinearMap::partial_dct(*q, n, *seed),
        OperatorSpec::Subsample { factor } => LinearMap::subsample(n, *factor),
        OperatorSpec::SubsampleVertical { factor } => match shape {
            [h, w] => LinearMap::subsample_rows_2d(*h, *w, *factor),
            _ => Err(Error::Config("subsample_vertical needs an image signal".into())),
        },
        OperatorSpec::Blur { kernel } => LinearMap::circular_conv(kernel.clone(), n),
    }
}

pub fn build_dictionary(choice: &DictionaryChoice, shape: &[usize]) -> Result<DictionarySpec> {
    let n: usize = shape.iter().product();
    match choice {
        DictionaryChoice::Identity => Ok(DictionarySpec::identity(n)),
        DictionaryChoice::FiniteDiff1d => DictionarySpec::finite_diff_1d(n),
        DictionaryChoice::FiniteDiff2d => match shape {
            [h, w] => DictionarySpec::finite_diff_2d(*h, *w),
            _ => Err(Error::Config("tv2d needs an image signal".into())),
        },
        DictionaryChoice::Haar { levels } => DictionarySpec::haar_shift_invariant(n, *levels),
    }
}

pub fn load_signal(source: &SignalSource) -> Result<Array> {
    match source {
        SignalSource::Blocks { n, pieces, seed } => Ok(Array::vector(signals::blocks(*n, *pieces, *seed)?)),
        SignalSource::Cartoon { height, width } => Array::image(*height, *width, signals::cartoon(*height, *width)?),
        SignalSource::File(path) => io::read_array(path),
    }
}

/// A generated problem instance.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub x0: Array,
    pub y: Vec<f64>,
    pub sigma: f64,
    /// Achieved input PSNR of `y` against `Φx₀`.
    pub psnr: f64,
    pub h0: bool,
    pub phi: LinearMap,
    pub dict: DictionarySpec,
}

impl Experiment {
    /// Problem at a given `λ`, carrying `σ` and the ground truth.
    pub fn problem(&self, lambda: f64) -> Result<Problem> {
        Problem::new(self.y.clone(), self.phi.clone(), self.dict.clone(), lambda)?
            .with_sigma(self.sigma)?
            .with_truth(self.x0.data.clone())
    }
}

/// Draws `y = Φx₀ + σw` with `w` from the config seed; a PSNR target fixes
/// `σ` for that particular draw.
pub fn generate(cfg: &ExperimentConfig) -> Result<Experiment> {
    cfg.validate()?;
    let x0 = load_signal(&cfg.signal)?;
    let phi = build_operator(&cfg.operator, &x0.shape)?;
    let dict = build_dictionary(&cfg.dictionary, &x0.shape)?;
    let h0 = check_h0(&phi, &dict)?;
    if !h0 {
        log::warn!("Ker Φ ∩ Ker D* is nontrivial for this configuration; solutions are not unique");
    }
    let clean = phi.apply(&x0.data)?;
    let noise = signals::gaussian_noise(clean.len(), mix_seed(cfg.seed, NOISE_SALT));
    let sigma = match cfg.noise {
        NoiseSpec::Sigma(s) => s,
        NoiseSpec::Psnr(target) => signals::sigma_for_psnr(&clean, &noise, target)?,
    };
    let y: Vec<f64> = if sigma == 0.0 {
        clean.clone()
    } else {
        clean.iter().zip(&noise).map(|(c, w)| c + sigma * w).collect()
    };
    let psnr = signals::psnr(&clean, &y);
    Ok(Experiment { x0, y, sigma, psnr, h0, phi, dict })
}

/// File names used by `gen` and `solve`.
pub const X0_FILE: &str = "x0.raw";
pub const Y_FILE: &str = "y.raw";
pub const META_FILE: &str = "meta.txt";

/// Writes `x0.raw`, `y.raw` and `meta.txt` into `dir`.
pub fn write_experiment(dir: &Path, cfg: &ExperimentConfig, exp: &Experiment) -> Result<()> {
    fs::create_dir_all(dir)?;
    io::write_array(&dir.join(X0_FILE), &exp.x0)?;
    io::write_array(&dir.join(Y_FILE), &Array::vector(exp.y.clone()))?;
    let mut meta = String::new();
    meta.push_str("# psnr = 10*log10(peak^2*n/||a-b||^2), peak = max(Phi x0)\n");
    meta.push_str(&format!("sigma = {}\n", exp.sigma));
    meta.push_str(&format!("psnr = {}\n", exp.psnr));
    meta.push_str(&format!("q = {}\nn = {}\np = {}\n", exp.phi.rows(), exp.phi.cols(), exp.dict.p()));
    meta.push_str(&format!("h0 = {}\n", exp.h0));
    meta.push_str("[config]\n");
    meta.push_str(&cfg.to_string());
    fs::write(dir.join(META_FILE), meta)?;
    Ok(())
}

/// Reads back a directory written by [`write_experiment`]; operators are
/// rebuilt from `cfg`.
pub fn read_experiment(dir: &Path, cfg: &ExperimentConfig) -> Result<Experiment> {
    let x0 = io::read_array(&dir.join(X0_FILE))?;
    let y = io::read_array(&dir.join(Y_FILE))?.data;
    let meta = fs::read_to_string(dir.join(META_FILE))?;
    let field = |key: &str| -> Result<f64> {
        meta.lines()
            .find_map(|l| l.split_once('=').filter(|(k, _)| k.trim() == key).map(|(_, v)| v.trim().to_string()))
            .ok_or_else(|| Error::Format(format!("{META_FILE} lacks '{key}'")))?
            .parse()
            .map_err(|_| Error::Format(format!("{META_FILE}: bad value for '{key}'")))
    };
    let (sigma, psnr) = (field("sigma")?, field("psnr")?);
    let phi = build_operator(&cfg.operator, &x0.shape)?;
    let dict = build_dictionary(&cfg.dictionary, &x0.shape)?;
    if y.len() != phi.rows() {
        return Err(Error::Format(format!("{Y_FILE} has {} samples, operator expects {}", y.len(), phi.rows())));
    }
    let h0 = check_h0(&phi, &dict)?;
    Ok(Experiment { x0, y, sigma, psnr, h0, phi, dict })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_exact() {
        let mut cfg = ExperimentConfig::compressed_sensing();
        cfg.noise = NoiseSpec::Sigma(0.0);
        let exp = generate(&cfg).unwrap();
        assert_eq!(exp.y, exp.phi.apply(&exp.x0.data).unwrap());
    }

    #[test]
    fn presets_satisfy_h0() {
        for cfg in [ExperimentConfig::super_resolution(), ExperimentConfig::compressed_sensing()] {
            assert!(generate(&cfg).unwrap().h0, "{}", cfg.name);
        }
    }

    #[test]
    fn files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::super_resolution();
        let exp = generate(&cfg).unwrap();
        write_experiment(dir.path(), &cfg, &exp).unwrap();
        let back = read_experiment(dir.path(), &cfg).unwrap();
        assert_eq!(back.y, exp.y);
        assert_eq!(back.x0, exp.x0);
        assert_eq!(back.sigma, exp.sigma);
    }
}

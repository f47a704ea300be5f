use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::prox::SolverParams;
use crate::risk::RiskSelection;

/// Measurement operator.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorSpec {
    Identity,
    /// `q` rows of the orthonormal DCT, picked with `seed`.
    PartialDct { q: usize, seed: u64 },
    /// Keeps every `factor`-th sample of a 1-D signal.
    Subsample { factor: usize },
    /// Keeps every `factor`-th image row.
    SubsampleVertical { factor: usize },
    /// Periodic 1-D convolution.
    Blur { kernel: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DictionaryChoice {
    Identity,
    FiniteDiff1d,
    FiniteDiff2d,
    Haar { levels: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalSource {
    /// Piecewise-constant 1-D signal.
    Blocks { n: usize, pieces: usize, seed: u64 },
    /// Piecewise-constant image made of rectangles and a disc.
    Cartoon { height: usize, width: usize },
    /// Previously written vector or PGM image.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    Sigma(f64),
    /// Target input PSNR in dB.
    Psnr(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpacing {
    Log,
    Linear,
}

/// `λ` grid; bounds are fractions of the data-dependent `λ_max` unless `absolute`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: GridSpacing,
    pub absolute: bool,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self { min: 1e-3, max: 1.0, count: 40, spacing: GridSpacing::Log, absolute: false }
    }
}

impl LambdaGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.max >= self.min && self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::Config(format!("lambda grid needs 0 < min <= max, got [{}, {}]", self.min, self.max)));
        }
        if self.count == 0 || (self.count > 1 && self.max == self.min) {
            return Err(Error::Config("lambda grid must be strictly increasing and non-empty".into()));
        }
        Ok(())
    }

    /// Grid values for a given scale (`λ_max`, ignored when absolute).
    pub fn values(&self, scale: f64) -> Vec<f64> {
        let s = if self.absolute { 1.0 } else { scale };
        let (lo, hi) = (self.min * s, self.max * s);
        if self.count == 1 {
            return vec![hi];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                let t = k as f64 / last;
                match self.spacing {
                    GridSpacing::Log => (lo.ln() + t * (hi.ln() - lo.ln())).exp(),
                    GridSpacing::Linear => lo + t * (hi - lo),
                }
            })
            .collect()
    }
}

/// Flat `key = value` experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub operator: OperatorSpec,
    pub dictionary: DictionaryChoice,
    pub signal: SignalSource,
    pub noise: NoiseSpec,
    pub grid: LambdaGrid,
    pub probes: usize,
    pub seed: u64,
    pub risks: RiskSelection,
    pub solver: SolverParams,
}

impl ExperimentConfig {
    /// 32×32 cartoon image, vertical subsampling by two, anisotropic TV.
    pub fn super_resolution() -> Self {
        Self {
            name: "super-resolution".into(),
            operator: OperatorSpec::SubsampleVertical { factor: 2 },
            dictionary: DictionaryChoice::FiniteDiff2d,
            signal: SignalSource::Cartoon { height: 32, width: 32 },
            noise: NoiseSpec::Psnr(27.78),
            grid: LambdaGrid::default(),
            probes: 1,
            seed: 0,
            risks: RiskSelection::ALL,
            solver: SolverParams::default(),
        }
    }

    /// Length-256 blocks signal, half-size partial DCT, 3-level shift-invariant Haar.
    pub fn compressed_sensing() -> Self {
        Self {
            name: "compressed-sensing".into(),
            operator: OperatorSpec::PartialDct { q: 128, seed: 1 },
            dictionary: DictionaryChoice::Haar { levels: 3 },
            signal: SignalSource::Blocks { n: 256, pieces: 8, seed: 0 },
            noise: NoiseSpec::Psnr(27.50),
            grid: LambdaGrid::default(),
            probes: 1,
            seed: 0,
            risks: RiskSelection::ALL,
            solver: SolverParams::default(),
        }
    }

    /// Preset by name.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "super-resolution" | "sr" => Ok(Self::super_resolution()),
            "compressed-sensing" | "cs" => Ok(Self::compressed_sensing()),
            other => Err(Error::Config(format!("unknown preset '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.solver.validate()?;
        match self.noise {
            NoiseSpec::Sigma(s) if !(s >= 0.0 && s.is_finite()) => {
                return Err(Error::Config(format!("sigma must be finite and >= 0, got {s}")))
            }
            NoiseSpec::Psnr(p) if !p.is_finite() => return Err(Error::Config("psnr must be finite".into())),
            _ => {}
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{}'", lineno + 1, k.trim())));
            }
        }
        let mut kv = Keys(map);
        let mut cfg = match kv.take("preset") {
            Some(p) => Self::preset(&p)?,
            None => Self::super_resolution(),
        };
        if let Some(v) = kv.take("name") {
            cfg.name = v;
        }
        if let Some(op) = kv.take("operator") {
            cfg.operator = match op.as_str() {
                "identity" => OperatorSpec::Identity,
                "partial_dct" => OperatorSpec::PartialDct { q: kv.req("q")?, seed: kv.get("op_seed")?.unwrap_or(0) },
                "subsample" => OperatorSpec::Subsample { factor: kv.get("factor")?.unwrap_or(2) },
                "subsample_vertical" => OperatorSpec::SubsampleVertical { factor: kv.get("factor")?.unwrap_or(2) },
                "blur" => OperatorSpec::Blur {
                    kernel: match kv.take("kernel") {
                        Some(k) => parse_list(&k)?,
                        None => vec![0.25, 0.5, 0.25],
                    },
                },
                other => return Err(Error::Config(format!("unknown operator '{other}'"))),
            };
        } else {
            // allow overriding preset parameters alone
            match &mut cfg.operator {
                OperatorSpec::PartialDct { q, seed } => {
                    if let Some(v) = kv.get("q")? {
                        *q = v;
                    }
                    if let Some(v) = kv.get("op_seed")? {
                        *seed = v;
                    }
                }
                OperatorSpec::Subsample { factor } | OperatorSpec::SubsampleVertical { factor } => {
                    if let Some(v) = kv.get("factor")? {
                        *factor = v;
                    }
                }
                OperatorSpec::Identity | OperatorSpec::Blur { .. } => {}
            }
        }
        if let Some(d) = kv.take("dictionary") {
            cfg.dictionary = match d.as_str() {
                "identity" => DictionaryChoice::Identity,
                "tv1d" => DictionaryChoice::FiniteDiff1d,
                "tv2d" => DictionaryChoice::FiniteDiff2d,
                "haar" => DictionaryChoice::Haar { levels: kv.get("levels")?.unwrap_or(3) },
                other => return Err(Error::Config(format!("unknown dictionary '{other}'"))),
            };
        } else if let DictionaryChoice::Haar { levels } = &mut cfg.dictionary {
            if let Some(v) = kv.get("levels")? {
                *levels = v;
            }
        }
        if let Some(s) = kv.take("signal") {
            cfg.signal = match s.as_str() {
                "blocks" => SignalSource::Blocks {
                    n: kv.req("n")?,
                    pieces: kv.get("pieces")?.unwrap_or(8),
                    seed: kv.get("signal_seed")?.unwrap_or(0),
                },
                "cartoon" => SignalSource::Cartoon { height: kv.req("height")?, width: kv.req("width")? },
                other => match other.strip_prefix("file:") {
                    Some(path) => SignalSource::File(PathBuf::from(path)),
                    None => return Err(Error::Config(format!("unknown signal '{other}'"))),
                },
            };
        } else {
            match &mut cfg.signal {
                SignalSource::Blocks { n, pieces, seed } => {
                    if let Some(v) = kv.get("n")? {
                        *n = v;
                    }
                    if let Some(v) = kv.get("pieces")? {
                        *pieces = v;
                    }
                    if let Some(v) = kv.get("signal_seed")? {
                        *seed = v;
                    }
                }
                SignalSource::Cartoon { height, width } => {
                    if let Some(v) = kv.get("height")? {
                        *height = v;
                    }
                    if let Some(v) = kv.get("width")? {
                        *width = v;
                    }
                }
                SignalSource::File(_) => {}
            }
        }
        match (kv.get::<f64>("sigma")?, kv.get::<f64>("psnr")?) {
            (Some(_), Some(_)) => return Err(Error::Config("give exactly one of sigma and psnr".into())),
            (Some(s), None) => cfg.noise = NoiseSpec::Sigma(s),
            (None, Some(p)) => cfg.noise = NoiseSpec::Psnr(p),
            (None, None) => {}
        }
        let absolute = kv.get::<f64>("lambda_min")?.is_some() || kv.get::<f64>("lambda_max")?.is_some();
        if absolute {
            cfg.grid.absolute = true;
            cfg.grid.min = kv.req("lambda_min")?;
            cfg.grid.max = kv.req("lambda_max")?;
        } else {
            if let Some(v) = kv.get("lambda_min_ratio")? {
                cfg.grid.min = v;
            }
            if let Some(v) = kv.get("lambda_max_ratio")? {
                cfg.grid.max = v;
            }
        }
        kv.take("lambda_min");
        kv.take("lambda_max");
        if let Some(v) = kv.get("lambda_count")? {
            cfg.grid.count = v;
        }
        if let Some(v) = kv.take("lambda_spacing") {
            cfg.grid.spacing = match v.as_str() {
                "log" => GridSpacing::Log,
                "linear" => GridSpacing::Linear,
                other => return Err(Error::Config(format!("unknown lambda_spacing '{other}'"))),
            };
        }
        if let Some(v) = kv.get("probes")? {
            cfg.probes = v;
        }
        if let Some(v) = kv.get("seed")? {
            cfg.seed = v;
        }
        if let Some(v) = kv.take("risks") {
            cfg.risks = v.parse()?;
        }
        if let Some(v) = kv.get("max_iters")? {
            cfg.solver.max_iters = v;
        }
        if let Some(v) = kv.get("tol")? {
            cfg.solver.tol = v;
        }
        if let Some(v) = kv.get("accelerated")? {
            cfg.solver.accelerated = v;
        }
        if let Some(v) = kv.get("polish")? {
            cfg.solver.polish = v;
        }
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name = {}", self.name)?;
        match &self.operator {
            OperatorSpec::Identity => writeln!(f, "operator = identity")?,
            OperatorSpec::PartialDct { q, seed } => writeln!(f, "operator = partial_dct\nq = {q}\nop_seed = {seed}")?,
            OperatorSpec::Subsample { factor } => writeln!(f, "operator = subsample\nfactor = {factor}")?,
            OperatorSpec::SubsampleVertical { factor } => writeln!(f, "operator = subsample_vertical\nfactor = {factor}")?,
            OperatorSpec::Blur { kernel } => {
                let k: Vec<String> = kernel.iter().map(|v| v.to_string()).collect();
                writeln!(f, "operator = blur\nkernel = {}", k.join(","))?
            }
        }
        match &self.dictionary {
            DictionaryChoice::Identity => writeln!(f, "dictionary = identity")?,
            DictionaryChoice::FiniteDiff1d => writeln!(f, "dictionary = tv1d")?,
            DictionaryChoice::FiniteDiff2d => writeln!(f, "dictionary = tv2d")?,
            DictionaryChoice::Haar { levels } => writeln!(f, "dictionary = haar\nlevels = {levels}")?,
        }
        match &self.signal {
            SignalSource::Blocks { n, pieces, seed } => {
                writeln!(f, "signal = blocks\nn = {n}\npieces = {pieces}\nsignal_seed = {seed}")?
            }
            SignalSource::Cartoon { height, width } => writeln!(f, "signal = cartoon\nheight = {height}\nwidth = {width}")?,
            SignalSource::File(p) => writeln!(f, "signal = file:{}", p.display())?,
        }
        match self.noise {
            NoiseSpec::Sigma(s) => writeln!(f, "sigma = {s}")?,
            NoiseSpec::Psnr(p) => writeln!(f, "psnr = {p}")?,
        }
        if self.grid.absolute {
            writeln!(f, "lambda_min = {}\nlambda_max = {}", self.grid.min, self.grid.max)?;
        } else {
            writeln!(f, "lambda_min_ratio = {}\nlambda_max_ratio = {}", self.grid.min, self.grid.max)?;
        }
        let spacing = match self.grid.spacing {
            GridSpacing::Log => "log",
            GridSpacing::Linear => "linear",
        };
        writeln!(f, "lambda_count = {}\nlambda_spacing = {spacing}", self.grid.count)?;
        writeln!(f, "probes = {}\nseed = {}\nrisks = {}", self.probes, self.seed, self.risks)?;
        writeln!(
            f,
            "max_iters = {}\ntol = {}\naccelerated = {}\npolish = {}",
            self.solver.max_iters, self.solver.tol, self.solver.accelerated, self.solver.polish
        )
    }
}

struct Keys(BTreeMap<String, String>);

impl Keys {
    fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'"))),
        }
    }

    fn req<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::Config(format!("missing key '{key}'")))
    }

    fn finish(self) -> Result<()> {
        let known = [
            "q", "op_seed", "factor", "levels", "n", "pieces", "signal_seed", "height", "width", "sigma", "psnr",
            "lambda_min_ratio", "lambda_max_ratio", "lambda_count", "probes", "seed", "max_iters", "tol",
            "accelerated", "polish",
        ];
        match self.0.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!("unknown key '{k}'"))),
            None => Ok(()),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("invalid number '{t}' in list"))))
        .collect()
}

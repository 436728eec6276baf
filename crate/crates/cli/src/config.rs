//! Experiment configuration: a flat `key=value` file, overridable per key.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use modelcs::Algorithm;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Recover,
    SweepM,
    SweepN,
    Noise,
    Bounds,
    Modelcheck,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Experiment::Recover => "recover",
            Experiment::SweepM => "sweep-m",
            Experiment::SweepN => "sweep-n",
            Experiment::Noise => "noise",
            Experiment::Bounds => "bounds",
            Experiment::Modelcheck => "modelcheck",
        }
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "recover" => Experiment::Recover,
            "sweep-m" => Experiment::SweepM,
            "sweep-n" => Experiment::SweepN,
            "noise" => Experiment::Noise,
            "bounds" => Experiment::Bounds,
            "modelcheck" => Experiment::Modelcheck,
            other => return Err(CliError::Config(format!("unknown experiment '{other}'"))),
        })
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Test signal families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    /// Deterministic HeaviSine, wavelet domain.
    HeaviSine,
    /// Random piecewise polynomial, wavelet domain, compressible.
    Piecewise,
    /// Best `K`-node tree approximation of a random piecewise polynomial.
    PiecewiseTree,
    /// Gaussian coefficients projected onto a random-looking `K`-node tree.
    TreeSparse,
    /// `K` Gaussian blocks of length `J`.
    BlockSparse,
    /// Gaussian blocks with power-law block norms (exponent `decay`).
    BlockCompressible,
}

impl SignalKind {
    pub fn id(self) -> &'static str {
        match self {
            SignalKind::HeaviSine => "heavisine",
            SignalKind::Piecewise => "piecewise",
            SignalKind::PiecewiseTree => "piecewise-tree",
            SignalKind::TreeSparse => "tree-sparse",
            SignalKind::BlockSparse => "block-sparse",
            SignalKind::BlockCompressible => "block-compressible",
        }
    }

    /// Whether the signal lives in the wavelet domain.
    pub fn is_wavelet(self) -> bool {
        !matches!(self, SignalKind::BlockSparse | SignalKind::BlockCompressible)
    }
}

impl FromStr for SignalKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "heavisine" => SignalKind::HeaviSine,
            "piecewise" => SignalKind::Piecewise,
            "piecewise-tree" => SignalKind::PiecewiseTree,
            "tree-sparse" => SignalKind::TreeSparse,
            "block-sparse" => SignalKind::BlockSparse,
            "block-compressible" => SignalKind::BlockCompressible,
            other => return Err(CliError::Config(format!("unknown signal '{other}'"))),
        })
    }
}

/// Model tags accepted by `model=`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelTag {
    Plain,
    Tree,
    Block,
}

impl ModelTag {
    pub fn id(self) -> &'static str {
        match self {
            ModelTag::Plain => "plain",
            ModelTag::Tree => "tree",
            ModelTag::Block => "block",
        }
    }
}

impl FromStr for ModelTag {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "plain" => ModelTag::Plain,
            "tree" => ModelTag::Tree,
            "block" => ModelTag::Block,
            other => return Err(CliError::Config(format!("unknown model '{other}'"))),
        })
    }
}

fn parse_algorithm(s: &str) -> Result<Algorithm, CliError> {
    match s {
        "cosamp" => Ok(Algorithm::CoSaMP),
        "iht" => Ok(Algorithm::Iht),
        other => Err(CliError::Config(format!("unknown algorithm '{other}'"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub signal: SignalKind,
    pub n: usize,
    /// Sparsity in model units (nodes or blocks).
    pub k: usize,
    /// Block length.
    pub j: usize,
    pub m: usize,
    /// Measurement counts as multiples of `K` (sweep-m).
    pub m_grid: Vec<f64>,
    /// Signal lengths (sweep-n, bounds).
    pub n_grid: Vec<usize>,
    /// Sparsities (bounds).
    pub k_grid: Vec<usize>,
    pub models: Vec<ModelTag>,
    pub algorithms: Vec<Algorithm>,
    pub filter: String,
    pub trials: usize,
    pub sigma_grid: Vec<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Recovered-signal CSV for the first trial of `recover`.
    pub signal_out: Option<PathBuf>,
    pub max_iters: usize,
    pub iht_max_iters: usize,
    pub halt_tol: f64,
    /// Block-norm decay exponent of block-compressible signals.
    pub decay: f64,
    pub pieces: usize,
    pub degree: usize,
    /// Record wall-clock times (makes output nondeterministic).
    pub timing: bool,
    /// Recovery attempts per `M` in the sweep-n search.
    pub attempts: usize,
    /// Sweep-n success threshold as a multiple of the best tree error.
    pub target_factor: f64,
    /// Noise experiment: `M` as a multiple of `K` for each model.
    pub model_m_factor: f64,
    pub plain_m_factor: f64,
    pub delta: f64,
    pub eps: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Recover,
            signal: SignalKind::HeaviSine,
            n: 1024,
            k: 26,
            j: 16,
            m: 80,
            m_grid: vec![2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0],
            n_grid: vec![128, 256, 512, 1024],
            k_grid: vec![2, 4, 8, 16, 32],
            models: vec![ModelTag::Plain, ModelTag::Tree],
            algorithms: vec![Algorithm::CoSaMP],
            filter: "db6".into(),
            trials: 50,
            sigma_grid: vec![0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05],
            seed: 0,
            out: None,
            signal_out: None,
            max_iters: 50,
            iht_max_iters: 500,
            halt_tol: 1e-6,
            decay: 1.0,
            pieces: 5,
            degree: 3,
            timing: false,
            attempts: 5,
            target_factor: 2.5,
            model_m_factor: 3.5,
            plain_m_factor: 5.0,
            delta: 0.1,
            eps: 0.1,
        }
    }
}

/// Every key accepted in a config file or by `--set`.
pub const KEYS: &[&str] = &[
    "experiment",
    "signal",
    "N",
    "K",
    "J",
    "M",
    "M_grid",
    "N_grid",
    "K_grid",
    "model",
    "algorithm",
    "filter",
    "trials",
    "sigma_grid",
    "seed",
    "out",
    "signal_out",
    "max_iters",
    "iht_max_iters",
    "halt_tol",
    "decay",
    "pieces",
    "degree",
    "timing",
    "attempts",
    "target_factor",
    "model_M_factor",
    "plain_M_factor",
    "delta",
    "eps",
];

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value '{value}' for {key}")))
}

fn list<T, F>(value: &str, mut parse: F) -> Result<Vec<T>, CliError>
where
    F: FnMut(&str) -> Result<T, CliError>,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s))
        .collect()
}

impl ExperimentConfig {
    pub fn for_experiment(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            ..Default::default()
        }
    }

    /// Applies one `key=value` assignment. Lists are comma-separated and may
    /// be empty.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "experiment" => self.experiment = value.parse()?,
            "signal" => self.signal = value.parse()?,
            "N" => self.n = scalar(key, value)?,
            "K" => self.k = scalar(key, value)?,
            "J" => self.j = scalar(key, value)?,
            "M" => self.m = scalar(key, value)?,
            "M_grid" => self.m_grid = list(value, |s| scalar(key, s))?,
            "N_grid" => self.n_grid = list(value, |s| scalar(key, s))?,
            "K_grid" => self.k_grid = list(value, |s| scalar(key, s))?,
            "model" => self.models = list(value, str::parse)?,
            "algorithm" => self.algorithms = list(value, parse_algorithm)?,
            "filter" => self.filter = value.to_string(),
            "trials" => self.trials = scalar(key, value)?,
            "sigma_grid" => self.sigma_grid = list(value, |s| scalar(key, s))?,
            "seed" => self.seed = scalar(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "signal_out" => self.signal_out = Some(PathBuf::from(value)),
            "max_iters" => self.max_iters = scalar(key, value)?,
            "iht_max_iters" => self.iht_max_iters = scalar(key, value)?,
            "halt_tol" => self.halt_tol = scalar(key, value)?,
            "decay" => self.decay = scalar(key, value)?,
            "pieces" => self.pieces = scalar(key, value)?,
            "degree" => self.degree = scalar(key, value)?,
            "timing" => self.timing = scalar(key, value)?,
            "attempts" => self.attempts = scalar(key, value)?,
            "target_factor" => self.target_factor = scalar(key, value)?,
            "model_M_factor" => self.model_m_factor = scalar(key, value)?,
            "plain_M_factor" => self.plain_m_factor = scalar(key, value)?,
            "delta" => self.delta = scalar(key, value)?,
            "eps" => self.eps = scalar(key, value)?,
            other => return Err(CliError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a `key=value` string.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got '{pair}'")))?;
        self.set(key.trim(), value)
    }

    /// Applies every assignment of a config file. Blank lines and text after
    /// `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.set_pair(line)
                .map_err(|e| CliError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Checks ranges shared by all experiments.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Usage(msg));
        if self.n == 0 || self.k == 0 || self.j == 0 {
            return fail("N, K and J must be at least 1".into());
        }
        if self.m == 0 {
            return fail("M must be at least 1".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.max_iters == 0 || self.iht_max_iters == 0 || self.attempts == 0 {
            return fail("iteration caps and attempts must be at least 1".into());
        }
        if self.sigma_grid.iter().any(|s| !(*s >= 0.0)) {
            return fail("sigma_grid entries must be nonnegative".into());
        }
        if self.m_grid.iter().any(|f| !(*f > 0.0)) {
            return fail("M_grid entries must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_with_comments_and_lists() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("# header\nN = 256\nK=8 # trailing\n\nmodel=plain,tree\nsigma_grid=\nalgorithm=cosamp,iht\n")
            .unwrap();
        assert_eq!(cfg.n, 256);
        assert_eq!(cfg.k, 8);
        assert_eq!(cfg.models, vec![ModelTag::Plain, ModelTag::Tree]);
        assert!(cfg.sigma_grid.is_empty());
        assert_eq!(cfg.algorithms, vec![Algorithm::CoSaMP, Algorithm::Iht]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.apply_text("colour=blue").is_err());
        assert!(cfg.apply_text("N=ten").is_err());
        assert!(cfg.apply_text("N").is_err());
        assert!(cfg.apply_text("model=forest").is_err());
    }

    #[test]
    fn every_documented_key_is_settable() {
        let samples = [
            ("experiment", "noise"),
            ("signal", "block-sparse"),
            ("M_grid", "2,3"),
            ("N_grid", "64"),
            ("K_grid", "1,2"),
            ("model", "block"),
            ("algorithm", "iht"),
            ("filter", "haar"),
            ("sigma_grid", "0.1"),
            ("out", "x.csv"),
            ("signal_out", "y.csv"),
            ("timing", "true"),
        ];
        for key in KEYS {
            let value = samples
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .unwrap_or("1");
            let mut cfg = ExperimentConfig::default();
            cfg.set(key, value).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }

    #[test]
    fn zero_measurements_fail_validation() {
        let mut cfg = ExperimentConfig::default();
        cfg.m = 0;
        assert!(cfg.validate().is_err());
    }
}

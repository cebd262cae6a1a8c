use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Activation;
use crate::zoo::{Family, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Experiment configuration, read from JSON. Every field has a default, so
/// `{}` is a valid file.
///
/// ```json
/// {
///   "models": [{"family": "mlp", "dims": [4, 16, 1], "activation": "tanh"}],
///   "seeds": [0, 1, 2],
///   "alpha": 0.01,
///   "gamma": 0.1,
///   "il_steps": 100,
///   "repetitions": 30,
///   "warmup": 5,
///   "tolerance": 1e-9,
///   "positive_threshold": 1e-6,
///   "output": "results.csv",
///   "format": "csv"
/// }
/// ```
///
/// Each model is built once per seed; the seed in a model entry is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub models: Vec<ModelSpec>,
    pub seeds: Vec<u64>,
    /// Learning rate shared by every algorithm.
    pub alpha: f64,
    /// Integration step for plain IL.
    pub gamma: f64,
    /// Fixed inference length `T` for plain IL.
    pub il_steps: usize,
    pub repetitions: usize,
    pub warmup: usize,
    /// Largest divergence accepted as "exactly equal".
    pub tolerance: f64,
    /// Smallest divergence accepted as "strictly different".
    pub positive_threshold: f64,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let tanh = Activation::Tanh;
        ExperimentConfig {
            models: vec![
                ModelSpec::new(Family::Mlp, vec![4, 16, 1], tanh, 0),
                ModelSpec::new(Family::Mlp, vec![4, 16, 16, 1], tanh, 0),
                ModelSpec::new(Family::Mlp, vec![4, 16, 16, 16, 1], tanh, 0),
                ModelSpec::new(Family::Conv1d, vec![8, 3], tanh, 0),
                ModelSpec::new(Family::Conv1d, vec![8, 3, 2], tanh, 0),
                ModelSpec::new(Family::Rnn, vec![3, 4, 5], tanh, 0),
                ModelSpec::new(Family::Residual, vec![4, 4, 4, 1], tanh, 0),
                ModelSpec::new(Family::ToyAttention, vec![4], tanh, 0),
            ],
            seeds: (0..20).collect(),
            alpha: 0.01,
            gamma: 0.1,
            il_steps: 100,
            repetitions: 30,
            warmup: 5,
            tolerance: 1e-9,
            positive_threshold: 1e-6,
            output: None,
            format: OutputFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    /// Timing defaults: the MLP miniature only, one seed.
    pub fn bench_default() -> Self {
        ExperimentConfig {
            models: vec![ModelSpec::new(Family::Mlp, vec![4, 16, 16, 1], Activation::Tanh, 0)],
            seeds: vec![0],
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.models.is_empty() {
            return bad("no models");
        }
        if self.seeds.is_empty() {
            return bad("no seeds");
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.alpha) || !positive(self.gamma) {
            return bad("alpha and gamma must be positive");
        }
        if self.tolerance.is_nan()
            || self.tolerance < 0.0
            || self.positive_threshold.is_nan()
            || self.positive_threshold < 0.0
        {
            return bad("thresholds must be non-negative");
        }
        Ok(())
    }
}

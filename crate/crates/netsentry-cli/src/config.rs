//! Pipeline configuration.
//!
//! One TOML document with a section per module; unknown keys are rejected.
//! Per-stage seeds are derived from the single run seed so every command is
//! reproducible from the config alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use netsentry_core::contrastive::ContrastiveConfig;
use netsentry_core::error::{Error, Result};
use netsentry_core::explain::ExplainConfig;
use netsentry_core::shift::ShiftConfig;
use netsentry_core::simulate::DriftKind;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub contrastive: ContrastiveSection,
    #[serde(default)]
    pub detect: DetectSection,
    #[serde(default)]
    pub explain: ExplainSection,
    #[serde(default)]
    pub adapt: AdaptSection,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Input paths; each command reads only the keys it needs.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub unlabeled: Option<PathBuf>,
    pub old: Option<PathBuf>,
    pub new: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub shift_report: Option<PathBuf>,
    pub explanation: Option<PathBuf>,
    #[serde(default)]
    pub windows: Vec<PathBuf>,
    #[serde(default)]
    pub test_windows: Vec<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_dims: Vec<usize>,
    pub latent_dim: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            hidden_dims: vec![128],
            latent_dim: 32,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastiveSection {
    pub temperature: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_normals: Option<usize>,
    pub batch_abnormals: Option<usize>,
}

impl Default for ContrastiveSection {
    fn default() -> Self {
        let base = ContrastiveConfig::default();
        Self {
            temperature: base.temperature,
            epochs: base.epochs,
            learning_rate: base.learning_rate,
            batch_normals: base.batch_normals,
            batch_abnormals: base.batch_abnormals,
        }
    }
}

impl ContrastiveSection {
    pub fn to_core(&self, seed: u64) -> ContrastiveConfig {
        ContrastiveConfig {
            temperature: self.temperature,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_normals: self.batch_normals,
            batch_abnormals: self.batch_abnormals,
            seed,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectSection {
    pub bins: usize,
    pub permutations: usize,
    pub alpha: f64,
}

impl Default for DetectSection {
    fn default() -> Self {
        let base = ShiftConfig::default();
        Self {
            bins: base.bins,
            permutations: base.permutations,
            alpha: base.alpha,
        }
    }
}

impl DetectSection {
    pub fn to_core(&self, seed: u64) -> ShiftConfig {
        ShiftConfig {
            bins: self.bins,
            permutations: self.permutations,
            alpha: self.alpha,
            seed,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainSection {
    pub lambda1: f64,
    pub lambda2: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub rounding_threshold: f64,
}

impl Default for ExplainSection {
    fn default() -> Self {
        let base = ExplainConfig::default();
        Self {
            lambda1: base.lambda1,
            lambda2: base.lambda2,
            iterations: base.iterations,
            learning_rate: base.learning_rate,
            rounding_threshold: base.rounding_threshold,
        }
    }
}

impl ExplainSection {
    /// Explanation histograms share the shift-detection binning.
    pub fn to_core(&self, bins: usize) -> ExplainConfig {
        ExplainConfig {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            rounding_threshold: self.rounding_threshold,
            bins,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptSection {
    pub gamma: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub temperature: Option<f64>,
    pub anchor_batch: usize,
}

impl Default for AdaptSection {
    fn default() -> Self {
        let base = netsentry_core::adapt::AdaptConfig::default();
        Self {
            gamma: base.gamma,
            epochs: base.epochs,
            learning_rate: base.learning_rate,
            temperature: None,
            anchor_batch: base.anchor_batch,
        }
    }
}

impl AdaptSection {
    /// The contrastive temperature defaults to the training temperature.
    pub fn to_core(&self, train_temperature: f64, seed: u64) -> netsentry_core::adapt::AdaptConfig {
        netsentry_core::adapt::AdaptConfig {
            gamma: self.gamma,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            temperature: self.temperature.unwrap_or(train_temperature),
            anchor_batch: self.anchor_batch,
            seed,
        }
    }
}

/// Scenario parameters for the `simulate` command.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub feature_dim: usize,
    pub windows: usize,
    pub n_normal: usize,
    pub n_abnormal: usize,
    pub drift_kind: DriftKind,
    /// Drift strength: sigmas of mean drift, scale factor per window, or
    /// samples converted per window for a prior shift.
    #[serde(default)]
    pub magnitude: f64,
    /// Scenario seed; falls back to the run seed.
    pub seed: Option<u64>,
    /// Held-out window sizes as a fraction of the training window.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

fn default_test_fraction() -> f64 {
    0.5
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
        })?;
        let config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.latent_dim == 0 || self.model.hidden_dims.contains(&0) {
            return Err(Error::InvalidConfig(
                "model dimensions must be positive".into(),
            ));
        }
        if let Some(sim) = &self.simulate {
            if sim.feature_dim == 0 || sim.windows == 0 {
                return Err(Error::InvalidConfig(
                    "simulate.feature_dim and simulate.windows must be positive".into(),
                ));
            }
            if !(0.0..=1.0).contains(&sim.test_fraction) {
                return Err(Error::InvalidConfig(
                    "simulate.test_fraction must be in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    /// Required-path accessor with a config-class error.
    pub fn require(path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        path.clone()
            .ok_or_else(|| Error::InvalidConfig(format!("config is missing data.{key}")))
    }
}

/// Stable per-stage seed derivation (FNV-1a over the stage tag, mixed with
/// the run seed and window index).
pub fn stage_seed(base: u64, stage: &str, window: usize) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in stage.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash ^= window as u64;
    hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    base ^ hash
}

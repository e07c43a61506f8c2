//! Command implementations behind the CLI surface.

mod adapt;
mod detect;
mod eval;
mod explain;
mod label;
mod lifecycle;
mod simulate;
mod train;

pub use adapt::{run_adapt, AdaptOutcome};
pub use detect::{run_detect, DetectOutcome};
pub use eval::{run_eval, EvalOutcome};
pub use explain::{run_explain, ExplainOutcome};
pub use label::{run_label, LabelOutcome};
pub use lifecycle::{run_lifecycle, LifecycleOutcome, WindowRow};
pub use simulate::{run_simulate, SimulateOutcome};
pub use train::{run_train, TrainOutcome};

use std::fs;
use std::path::{Path, PathBuf};

use netsentry_core::data::LabeledSample;
use netsentry_core::error::{Error, Result};
use netsentry_core::labeler::LabelerState;
use netsentry_core::shift::posterior_normal;
use netsentry_core::simulate::{read_csv, CsvDataset};
use netsentry_core::Autoencoder;

use crate::config::PipelineConfig;

/// Everything a command needs: the parsed config, its raw text (hashed into
/// manifests), the output directory, the effective seed, and the force flag.
pub struct RunContext {
    pub config: PipelineConfig,
    pub config_text: Option<String>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub force: bool,
}

impl RunContext {
    pub fn new(
        config_path: &Path,
        seed_override: Option<u64>,
        out_override: Option<PathBuf>,
        force: bool,
    ) -> Result<Self> {
        let config_text = fs::read_to_string(config_path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config {}: {e}", config_path.display()))
        })?;
        let config: PipelineConfig = toml::from_str(&config_text)
            .map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))?;
        config.validate()?;
        let out_dir = out_override.unwrap_or_else(|| config.output_dir.clone());
        let seed = seed_override.unwrap_or(config.seed);
        Ok(Self {
            config,
            config_text: Some(config_text),
            out_dir,
            seed,
            force,
        })
    }

    /// Context from an in-memory config, used by tests.
    pub fn from_config(config: PipelineConfig, out_dir: PathBuf, force: bool) -> Self {
        Self {
            seed: config.seed,
            config,
            config_text: None,
            out_dir,
            force,
        }
    }

    pub(crate) fn ensure_out_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir)?;
        Ok(())
    }
}

/// Reads a CSV that must carry labels.
pub(crate) fn read_labeled(path: &Path) -> Result<Vec<LabeledSample>> {
    let samples = netsentry_core::simulate::import_csv(path)?;
    if samples.is_empty() {
        return Err(Error::InvalidData(format!(
            "{} contains no samples",
            path.display()
        )));
    }
    Ok(samples)
}

/// Reads a CSV with or without a label column.
pub(crate) fn read_any(path: &Path) -> Result<CsvDataset> {
    read_csv(path)
}

/// Posterior normality probabilities for a feature matrix under the current
/// model and labeler.
pub(crate) fn posteriors(
    model: &Autoencoder,
    labeler: &LabelerState,
    features: &[Vec<f64>],
) -> Result<Vec<f64>> {
    features
        .iter()
        .map(|row| {
            let score = labeler.selected_score(model, row)?;
            posterior_normal(score, labeler)
        })
        .collect()
}

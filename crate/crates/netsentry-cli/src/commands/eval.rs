//! `eval`: pseudo-label a labeled test set and score against ground truth.

use std::path::PathBuf;

use netsentry_core::error::Result;
use netsentry_core::metrics::{compute_metrics, confusion, MetricsReport};

use crate::config::PipelineConfig;
use crate::report::{load_fitted_checkpoint, metrics_doc, Manifest};

use super::{read_labeled, RunContext};

pub struct EvalOutcome {
    pub metrics: MetricsReport,
    pub report_path: PathBuf,
    pub manifest_path: PathBuf,
}

pub fn run_eval(ctx: &RunContext) -> Result<EvalOutcome> {
    let checkpoint_path = PipelineConfig::require(&ctx.config.data.checkpoint, "checkpoint")?;
    let test_path = PipelineConfig::require(&ctx.config.data.test, "test")?;

    let (model, labeler) = load_fitted_checkpoint(&checkpoint_path)?;
    let samples = read_labeled(&test_path)?;
    let mut predictions = Vec::with_capacity(samples.len());
    let mut truths = Vec::with_capacity(samples.len());
    for sample in &samples {
        predictions.push(labeler.pseudo_label(&model, &sample.features)?);
        truths.push(sample.label);
    }
    let cm = confusion(&predictions, &truths)?;
    let metrics = compute_metrics(&cm)?;

    ctx.ensure_out_dir()?;
    let report_path = ctx.out_dir.join("eval.report");
    metrics_doc(&metrics, &cm).save(&report_path)?;

    let mut manifest = Manifest::new("eval", ctx.seed, ctx.config_text.as_deref());
    manifest.record_input("checkpoint", &checkpoint_path)?;
    manifest.record_input("test", &test_path)?;
    manifest.record_output("report", &report_path)?;
    let manifest_path = ctx.out_dir.join("eval.manifest");
    manifest.save(&manifest_path)?;

    Ok(EvalOutcome {
        metrics,
        report_path,
        manifest_path,
    })
}

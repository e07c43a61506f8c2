//! `explain`: select the sample subset describing a detected shift.
//!
//! Runs only when a prior shift report says a shift happened, unless
//! `--force` is given. Selected-sample CSV subsets are written for audit and
//! consumed by `adapt`.

use std::path::{Path, PathBuf};

use netsentry_core::error::{Error, Result};
use netsentry_core::explain::{explain, ExplanationResult};
use netsentry_core::simulate::export_features_csv;

use crate::config::PipelineConfig;
use crate::doc::Document;
use crate::report::{
    explanation_doc, load_fitted_checkpoint, shift_report_from_doc, ExplanationDocContext,
    Manifest,
};

use super::{posteriors, read_any, RunContext};

pub struct ExplainOutcome {
    pub result: ExplanationResult,
    pub report_path: PathBuf,
    pub selected_old_csv: PathBuf,
    pub selected_new_csv: PathBuf,
    pub manifest_path: PathBuf,
}

pub fn run_explain(ctx: &RunContext) -> Result<ExplainOutcome> {
    let checkpoint_path = PipelineConfig::require(&ctx.config.data.checkpoint, "checkpoint")?;
    let old_path = PipelineConfig::require(&ctx.config.data.old, "old")?;
    let new_path = PipelineConfig::require(&ctx.config.data.new, "new")?;

    let shift_report_path = ctx.config.data.shift_report.clone();
    if !ctx.force {
        let path = shift_report_path.as_deref().ok_or_else(|| {
            Error::InvalidConfig(
                "explain is gated on a shift report; set data.shift_report or pass --force".into(),
            )
        })?;
        let report = shift_report_from_doc(&Document::load(path, "shift-report")?)?;
        if !report.shifted {
            return Err(Error::InvalidData(format!(
                "{} reports no shift (p = {}); pass --force to explain anyway",
                path.display(),
                report.p_value
            )));
        }
    }

    let (model, labeler) = load_fitted_checkpoint(&checkpoint_path)?;
    let old_features = read_any(&old_path)?.features;
    let new_features = read_any(&new_path)?.features;
    let old_posteriors = posteriors(&model, &labeler, &old_features)?;
    let new_posteriors = posteriors(&model, &labeler, &new_features)?;

    let explain_config = ctx.config.explain.to_core(ctx.config.detect.bins);
    let result = explain(&old_posteriors, &new_posteriors, &explain_config)?;

    ctx.ensure_out_dir()?;
    let selected_old_csv = ctx.out_dir.join("selected_old.csv");
    let selected_new_csv = ctx.out_dir.join("selected_new.csv");
    write_subset(&old_features, &result.selected_old, &selected_old_csv)?;
    write_subset(&new_features, &result.selected_new, &selected_new_csv)?;

    let report_path = ctx.out_dir.join("explanation.report");
    explanation_doc(&ExplanationDocContext {
        result: &result,
        config: &explain_config,
        seed: ctx.seed,
        selected_old_csv: &selected_old_csv,
        selected_new_csv: &selected_new_csv,
        shift_report: shift_report_path.as_deref(),
    })
    .save(&report_path)?;

    let mut manifest = Manifest::new("explain", ctx.seed, ctx.config_text.as_deref());
    manifest.record_input("checkpoint", &checkpoint_path)?;
    manifest.record_input("old", &old_path)?;
    manifest.record_input("new", &new_path)?;
    if let Some(path) = &shift_report_path {
        manifest.record_input("shift_report", path)?;
    }
    manifest.record_output("explanation", &report_path)?;
    manifest.record_output("selected_old", &selected_old_csv)?;
    manifest.record_output("selected_new", &selected_new_csv)?;
    let manifest_path = ctx.out_dir.join("explain.manifest");
    manifest.save(&manifest_path)?;

    Ok(ExplainOutcome {
        result,
        report_path,
        selected_old_csv,
        selected_new_csv,
        manifest_path,
    })
}

fn write_subset(features: &[Vec<f64>], indices: &[usize], path: &Path) -> Result<()> {
    let dim = features.first().map_or(0, Vec::len);
    let subset: Vec<Vec<f64>> = indices.iter().map(|&i| features[i].clone()).collect();
    export_features_csv(&subset, dim, path)
}

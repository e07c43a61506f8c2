//! `detect`: permutation test between an old and a new window.

use std::path::PathBuf;

use netsentry_core::error::Result;
use netsentry_core::shift::{permutation_test, ShiftReport};

use crate::config::{stage_seed, PipelineConfig};
use crate::report::{load_fitted_checkpoint, shift_report_doc, Manifest};

use super::{posteriors, read_any, RunContext};

pub struct DetectOutcome {
    pub report: ShiftReport,
    pub report_path: PathBuf,
    pub manifest_path: PathBuf,
}

pub fn run_detect(ctx: &RunContext) -> Result<DetectOutcome> {
    let checkpoint_path = PipelineConfig::require(&ctx.config.data.checkpoint, "checkpoint")?;
    let old_path = PipelineConfig::require(&ctx.config.data.old, "old")?;
    let new_path = PipelineConfig::require(&ctx.config.data.new, "new")?;

    let (model, labeler) = load_fitted_checkpoint(&checkpoint_path)?;
    let old_posteriors = posteriors(&model, &labeler, &read_any(&old_path)?.features)?;
    let new_posteriors = posteriors(&model, &labeler, &read_any(&new_path)?.features)?;

    let shift_config = ctx
        .config
        .detect
        .to_core(stage_seed(ctx.seed, "detect", 0));
    let report = permutation_test(&old_posteriors, &new_posteriors, &shift_config)?;

    ctx.ensure_out_dir()?;
    let report_path = ctx.out_dir.join("shift.report");
    shift_report_doc(&report).save(&report_path)?;

    let mut manifest = Manifest::new("detect", ctx.seed, ctx.config_text.as_deref());
    manifest.record_input("checkpoint", &checkpoint_path)?;
    manifest.record_input("old", &old_path)?;
    manifest.record_input("new", &new_path)?;
    manifest.record_output("shift_report", &report_path)?;
    let manifest_path = ctx.out_dir.join("detect.manifest");
    manifest.save(&manifest_path)?;

    Ok(DetectOutcome {
        report,
        report_path,
        manifest_path,
    })
}

//! `adapt`: teacher-student fine-tuning on the explanation-selected samples.
//!
//! The selected subsets are pseudo-labeled by the current checkpoint's
//! labeler — adaptation never consumes manual labels. The adapted model and
//! refitted labeler are written as a new versioned checkpoint; the original
//! checkpoint is never touched.

use std::path::PathBuf;

use netsentry_core::adapt::{adapt, AdaptReport};
use netsentry_core::data::LabeledSample;
use netsentry_core::error::{Error, Result};
use netsentry_core::labeler::LabelerState;
use netsentry_core::{Autoencoder, Checkpoint};

use crate::config::{stage_seed, PipelineConfig};
use crate::doc::Document;
use crate::report::{
    adapt_doc, explanation_from_doc, hash_file, load_fitted_checkpoint,
    write_versioned_checkpoint, Manifest,
};

use super::{read_any, RunContext};

pub struct AdaptOutcome {
    pub checkpoint: PathBuf,
    pub report_path: PathBuf,
    pub manifest_path: PathBuf,
    pub report: AdaptReport,
}

pub(crate) fn pseudo_label_features(
    model: &Autoencoder,
    labeler: &LabelerState,
    features: Vec<Vec<f64>>,
) -> Result<Vec<LabeledSample>> {
    features
        .into_iter()
        .map(|row| {
            let label = labeler.pseudo_label(model, &row)?;
            Ok(LabeledSample::new(row, label))
        })
        .collect()
}

pub fn run_adapt(ctx: &RunContext) -> Result<AdaptOutcome> {
    let checkpoint_path = PipelineConfig::require(&ctx.config.data.checkpoint, "checkpoint")?;
    let explanation_path = PipelineConfig::require(&ctx.config.data.explanation, "explanation")?;

    let explanation = Document::load(&explanation_path, "explanation")?;
    let result = explanation_from_doc(&explanation)?;
    if result.selection_size() == 0 {
        return Err(Error::InvalidData(
            "explanation selected no samples; refusing to adapt".into(),
        ));
    }
    // Subset links are file names resolved against the report's directory.
    let report_dir = explanation_path.parent().unwrap_or(std::path::Path::new("."));
    let selected_old_csv = report_dir.join(explanation.get("selected_old_csv")?);
    let selected_new_csv = report_dir.join(explanation.get("selected_new_csv")?);

    let (mut model, labeler) = load_fitted_checkpoint(&checkpoint_path)?;
    let old_selected =
        pseudo_label_features(&model, &labeler, read_any(&selected_old_csv)?.features)?;
    let new_selected =
        pseudo_label_features(&model, &labeler, read_any(&selected_new_csv)?.features)?;

    let adapt_config = ctx.config.adapt.to_core(
        ctx.config.contrastive.temperature,
        stage_seed(ctx.seed, "adapt", 0),
    );
    let (_teacher, new_labeler, report) =
        adapt(&mut model, &old_selected, &new_selected, &labeler, &adapt_config)?;

    ctx.ensure_out_dir()?;
    let teacher_hash = hash_file(&checkpoint_path)?;
    let new_checkpoint = Checkpoint::new(model, Some(new_labeler));
    let new_checkpoint_path = write_versioned_checkpoint(&new_checkpoint, &ctx.out_dir)?;

    let report_path = ctx.out_dir.join("adapt.report");
    adapt_doc(&report, &checkpoint_path, &teacher_hash).save(&report_path)?;

    let mut manifest = Manifest::new("adapt", ctx.seed, ctx.config_text.as_deref());
    manifest.record_input("checkpoint", &checkpoint_path)?;
    manifest.record_input("explanation", &explanation_path)?;
    manifest.record_input("selected_old", &selected_old_csv)?;
    manifest.record_input("selected_new", &selected_new_csv)?;
    manifest.record_output("checkpoint", &new_checkpoint_path)?;
    manifest.record_output("report", &report_path)?;
    let manifest_path = ctx.out_dir.join("adapt.manifest");
    manifest.save(&manifest_path)?;

    Ok(AdaptOutcome {
        checkpoint: new_checkpoint_path,
        report_path,
        manifest_path,
        report,
    })
}

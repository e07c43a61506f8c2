//! `train`: contrastive training plus labeler fitting, persisted as a
//! versioned checkpoint.

use std::path::PathBuf;

use netsentry_core::contrastive::{self, TrainReport};
use netsentry_core::error::Result;
use netsentry_core::labeler::fit_labeler;
use netsentry_core::{Architecture, Autoencoder, Checkpoint};

use crate::config::{stage_seed, PipelineConfig};
use crate::doc::Document;
use crate::report::{write_versioned_checkpoint, Manifest};

use super::{read_labeled, RunContext};

pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub report_path: PathBuf,
    pub manifest_path: PathBuf,
    pub report: TrainReport,
}

pub fn run_train(ctx: &RunContext) -> Result<TrainOutcome> {
    let train_path = PipelineConfig::require(&ctx.config.data.train, "train")?;
    let dataset = read_labeled(&train_path)?;
    let dim = dataset[0].features.len();
    netsentry_core::data::validate_dataset(&dataset, dim)?;

    let architecture = Architecture::new(
        dim,
        ctx.config.model.hidden_dims.clone(),
        ctx.config.model.latent_dim,
    );
    let mut model = Autoencoder::seeded(architecture, stage_seed(ctx.seed, "init", 0))?;
    let train_config = ctx
        .config
        .contrastive
        .to_core(stage_seed(ctx.seed, "train", 0));
    let report = contrastive::train(&mut model, &dataset, &train_config)?;
    let labeler = fit_labeler(&model, &dataset)?;
    let checkpoint = Checkpoint::new(model, Some(labeler));

    ctx.ensure_out_dir()?;
    let checkpoint_path = write_versioned_checkpoint(&checkpoint, &ctx.out_dir)?;

    let mut doc = Document::new("train-report");
    doc.push("seed", ctx.seed);
    doc.push("samples", dataset.len());
    doc.push("feature_dim", dim);
    doc.push("epochs", train_config.epochs);
    doc.push("batches_per_epoch", report.batches_per_epoch);
    doc.push_list("loss_trace", report.loss_trace.iter());
    let report_path = ctx.out_dir.join("train.report");
    doc.save(&report_path)?;

    let mut manifest = Manifest::new("train", ctx.seed, ctx.config_text.as_deref());
    manifest.record_input("train", &train_path)?;
    manifest.record_output("checkpoint", &checkpoint_path)?;
    manifest.record_output("report", &report_path)?;
    let manifest_path = ctx.out_dir.join("train.manifest");
    manifest.save(&manifest_path)?;

    Ok(TrainOutcome {
        checkpoint: checkpoint_path,
        report_path,
        manifest_path,
        report,
    })
}

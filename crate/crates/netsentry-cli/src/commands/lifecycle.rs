//! `lifecycle`: the full loop over a multi-window dataset.
//!
//! Trains on window 0, then for every later window: score posteriors against
//! the current reference window, run the permutation test, and — when a
//! shift is detected (or `--force` is given) — explain it, pseudo-label the
//! selected samples, adapt, and refit. Each window is evaluated on its
//! held-out test set before and after adaptation, and the original test
//! window is re-evaluated after each adaptation to track forgetting. After
//! an adaptation the explanation-selected samples become the new reference
//! window.
//!
//! Window 0 must carry trusted labels; later windows are treated as
//! unlabeled arrivals (their label column, when present, is ignored by every
//! stage except evaluation against the held-out test sets).

use std::path::PathBuf;

use netsentry_core::adapt::adapt;
use netsentry_core::contrastive;
use netsentry_core::data::LabeledSample;
use netsentry_core::error::{Error, Result};
use netsentry_core::explain::explain;
use netsentry_core::labeler::{fit_labeler, LabelerState};
use netsentry_core::metrics::{compute_metrics, confusion, MetricsReport};
use netsentry_core::shift::{permutation_test, ShiftReport};
use netsentry_core::simulate::export_csv;
use netsentry_core::{Architecture, Autoencoder, Checkpoint};

use crate::config::stage_seed;
use crate::doc::Document;
use crate::report::{
    adapt_doc, explanation_doc, hash_file, shift_report_doc, write_versioned_checkpoint,
    ExplanationDocContext, Manifest,
};

use super::adapt::pseudo_label_features;
use super::{posteriors, read_labeled, RunContext};

/// Per-window outcome in the lifecycle table.
pub struct WindowRow {
    pub window: usize,
    pub shift: Option<ShiftReport>,
    pub adapted: bool,
    /// Metrics on this window's test set before any adaptation this round.
    pub pre: MetricsReport,
    /// Metrics on this window's test set after adaptation.
    pub post: Option<MetricsReport>,
    /// Metrics on the original (window 0) test set after adaptation.
    pub origin_post: Option<MetricsReport>,
}

pub struct LifecycleOutcome {
    pub rows: Vec<WindowRow>,
    /// Metrics on the original test set right after initial training.
    pub initial: MetricsReport,
    pub checkpoints: Vec<PathBuf>,
    pub report_path: PathBuf,
    pub manifest_path: PathBuf,
}

fn evaluate(
    model: &Autoencoder,
    labeler: &LabelerState,
    samples: &[LabeledSample],
) -> Result<MetricsReport> {
    let mut predictions = Vec::with_capacity(samples.len());
    let mut truths = Vec::with_capacity(samples.len());
    for sample in samples {
        predictions.push(labeler.pseudo_label(model, &sample.features)?);
        truths.push(sample.label);
    }
    compute_metrics(&confusion(&predictions, &truths)?)
}

fn push_metrics(doc: &mut Document, prefix: &str, metrics: &MetricsReport) {
    doc.push(&format!("{prefix}.f1"), metrics.f1);
    doc.push(&format!("{prefix}.accuracy"), metrics.accuracy);
    doc.push(&format!("{prefix}.bacc"), metrics.bacc);
    doc.push(&format!("{prefix}.mcc"), metrics.mcc);
    doc.push(&format!("{prefix}.tpr"), metrics.tpr);
    doc.push(&format!("{prefix}.tnr"), metrics.tnr);
    doc.push(&format!("{prefix}.fpr"), metrics.fpr);
}

pub fn run_lifecycle(ctx: &RunContext) -> Result<LifecycleOutcome> {
    let window_paths = &ctx.config.data.windows;
    let test_paths = &ctx.config.data.test_windows;
    if window_paths.len() < 2 {
        return Err(Error::InvalidConfig(
            "lifecycle needs at least two entries in data.windows".into(),
        ));
    }
    if test_paths.len() != window_paths.len() {
        return Err(Error::InvalidConfig(
            "data.test_windows must match data.windows in length".into(),
        ));
    }

    let mut windows = Vec::with_capacity(window_paths.len());
    for path in window_paths {
        windows.push(read_labeled(path)?);
    }
    let mut test_windows = Vec::with_capacity(test_paths.len());
    for path in test_paths {
        test_windows.push(read_labeled(path)?);
    }
    let dim = windows[0][0].features.len();
    for window in windows.iter().chain(test_windows.iter()) {
        netsentry_core::data::validate_dataset(window, dim)?;
    }

    ctx.ensure_out_dir()?;
    let mut manifest = Manifest::new("lifecycle", ctx.seed, ctx.config_text.as_deref());
    for (k, path) in window_paths.iter().enumerate() {
        manifest.record_input(&format!("window_{k}"), path)?;
    }
    for (k, path) in test_paths.iter().enumerate() {
        manifest.record_input(&format!("test_{k}"), path)?;
    }

    // Initial training on window 0.
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
    contrastive::train(&mut model, &windows[0], &train_config)?;
    let mut labeler = fit_labeler(&model, &windows[0])?;

    let mut checkpoints = Vec::new();
    let initial_checkpoint =
        write_versioned_checkpoint(&Checkpoint::new(model.clone(), Some(labeler.clone())), &ctx.out_dir)?;
    manifest.record_output("checkpoint_initial", &initial_checkpoint)?;
    checkpoints.push(initial_checkpoint);

    let initial = evaluate(&model, &labeler, &test_windows[0])?;
    let mut reference: Vec<LabeledSample> = windows[0].clone();
    let mut rows = Vec::new();

    for k in 1..windows.len() {
        let reference_features: Vec<Vec<f64>> =
            reference.iter().map(|s| s.features.clone()).collect();
        let new_features: Vec<Vec<f64>> =
            windows[k].iter().map(|s| s.features.clone()).collect();
        let old_posteriors = posteriors(&model, &labeler, &reference_features)?;
        let new_posteriors = posteriors(&model, &labeler, &new_features)?;

        let shift_config = ctx
            .config
            .detect
            .to_core(stage_seed(ctx.seed, "detect", k));
        let shift = permutation_test(&old_posteriors, &new_posteriors, &shift_config)?;
        let shift_path = ctx.out_dir.join(format!("shift_w{k}.report"));
        shift_report_doc(&shift).save(&shift_path)?;
        manifest.record_output(&format!("shift_w{k}"), &shift_path)?;

        let pre = evaluate(&model, &labeler, &test_windows[k])?;

        let mut row = WindowRow {
            window: k,
            shift: Some(shift.clone()),
            adapted: false,
            pre,
            post: None,
            origin_post: None,
        };

        if shift.shifted || ctx.force {
            // Explain the shift and materialize the audit subsets.
            let explain_config = ctx.config.explain.to_core(ctx.config.detect.bins);
            let result = explain(&old_posteriors, &new_posteriors, &explain_config)?;

            let selected_old: Vec<LabeledSample> = result
                .selected_old
                .iter()
                .map(|&i| reference[i].clone())
                .collect();
            let selected_new_features: Vec<Vec<f64>> = result
                .selected_new
                .iter()
                .map(|&i| new_features[i].clone())
                .collect();

            let selected_old_csv = ctx.out_dir.join(format!("selected_old_w{k}.csv"));
            let selected_new_csv = ctx.out_dir.join(format!("selected_new_w{k}.csv"));
            netsentry_core::simulate::export_features_csv(
                &selected_old
                    .iter()
                    .map(|s| s.features.clone())
                    .collect::<Vec<_>>(),
                dim,
                &selected_old_csv,
            )?;
            netsentry_core::simulate::export_features_csv(
                &selected_new_features,
                dim,
                &selected_new_csv,
            )?;

            let explanation_path = ctx.out_dir.join(format!("explanation_w{k}.report"));
            explanation_doc(&ExplanationDocContext {
                result: &result,
                config: &explain_config,
                seed: ctx.seed,
                selected_old_csv: &selected_old_csv,
                selected_new_csv: &selected_new_csv,
                shift_report: Some(&shift_path),
            })
            .save(&explanation_path)?;
            manifest.record_output(&format!("explanation_w{k}"), &explanation_path)?;
            manifest.record_output(&format!("selected_old_w{k}"), &selected_old_csv)?;
            manifest.record_output(&format!("selected_new_w{k}"), &selected_new_csv)?;

            // Pseudo-label the selection and fine-tune.
            let old_pseudo = pseudo_label_features(
                &model,
                &labeler,
                selected_old.iter().map(|s| s.features.clone()).collect(),
            )?;
            let new_pseudo = pseudo_label_features(&model, &labeler, selected_new_features)?;

            let teacher_hash = hash_file(checkpoints.last().expect("initial checkpoint"))?;
            let adapt_config = ctx.config.adapt.to_core(
                ctx.config.contrastive.temperature,
                stage_seed(ctx.seed, "adapt", k),
            );
            let (_teacher, new_labeler, adapt_report) =
                adapt(&mut model, &old_pseudo, &new_pseudo, &labeler, &adapt_config)?;
            labeler = new_labeler;

            let checkpoint_path = write_versioned_checkpoint(
                &Checkpoint::new(model.clone(), Some(labeler.clone())),
                &ctx.out_dir,
            )?;
            manifest.record_output(&format!("checkpoint_w{k}"), &checkpoint_path)?;

            let adapt_path = ctx.out_dir.join(format!("adapt_w{k}.report"));
            adapt_doc(
                &adapt_report,
                checkpoints.last().expect("initial checkpoint"),
                &teacher_hash,
            )
            .save(&adapt_path)?;
            manifest.record_output(&format!("adapt_w{k}"), &adapt_path)?;
            checkpoints.push(checkpoint_path);

            row.adapted = true;
            row.post = Some(evaluate(&model, &labeler, &test_windows[k])?);
            row.origin_post = Some(evaluate(&model, &labeler, &test_windows[0])?);

            // The selected samples become the next reference window.
            reference = old_pseudo.into_iter().chain(new_pseudo).collect();
            let reference_csv = ctx.out_dir.join(format!("reference_after_w{k}.csv"));
            export_csv(&reference, dim, &reference_csv)?;
            manifest.record_output(&format!("reference_after_w{k}"), &reference_csv)?;
        } else {
            log::info!(
                "window {k}: no shift detected (p = {}); adaptation skipped",
                shift.p_value
            );
        }

        rows.push(row);
    }

    // The windows-by-metrics table.
    let mut doc = Document::new("lifecycle");
    doc.push("seed", ctx.seed);
    doc.push("windows", windows.len());
    push_metrics(&mut doc, "window0.initial", &initial);
    for row in &rows {
        let w = row.window;
        if let Some(shift) = &row.shift {
            doc.push(&format!("window{w}.kl_statistic"), shift.kl_statistic);
            doc.push(&format!("window{w}.p_value"), shift.p_value);
            doc.push(&format!("window{w}.shifted"), shift.shifted);
        }
        doc.push(&format!("window{w}.adapted"), row.adapted);
        push_metrics(&mut doc, &format!("window{w}.pre"), &row.pre);
        if let Some(post) = &row.post {
            push_metrics(&mut doc, &format!("window{w}.post"), post);
        }
        if let Some(origin) = &row.origin_post {
            push_metrics(&mut doc, &format!("window{w}.origin_post"), origin);
        }
    }
    let report_path = ctx.out_dir.join("lifecycle.report");
    doc.save(&report_path)?;
    manifest.record_output("lifecycle", &report_path)?;

    let manifest_path = ctx.out_dir.join("lifecycle.manifest");
    manifest.save(&manifest_path)?;

    Ok(LifecycleOutcome {
        rows,
        initial,
        checkpoints,
        report_path,
        manifest_path,
    })
}

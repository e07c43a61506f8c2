//! Typed report documents and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use netsentry_core::adapt::AdaptReport;
use netsentry_core::error::{Error, Result};
use netsentry_core::explain::ExplanationResult;
use netsentry_core::metrics::{ConfusionMatrix, MetricsReport};
use netsentry_core::shift::ShiftReport;

use crate::doc::Document;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

pub fn shift_report_doc(report: &ShiftReport) -> Document {
    let mut doc = Document::new("shift-report");
    doc.push("kl_statistic", report.kl_statistic);
    doc.push("p_value", report.p_value);
    doc.push("shifted", report.shifted);
    doc.push("permutations", report.permutations);
    doc.push("alpha", report.alpha);
    doc.push("bins", report.bins);
    doc.push("n_old", report.n_old);
    doc.push("n_new", report.n_new);
    doc.push("seed", report.seed);
    doc
}

pub fn shift_report_from_doc(doc: &Document) -> Result<ShiftReport> {
    Ok(ShiftReport {
        kl_statistic: doc.get_parsed("kl_statistic")?,
        p_value: doc.get_parsed("p_value")?,
        shifted: doc.get_parsed("shifted")?,
        permutations: doc.get_parsed("permutations")?,
        alpha: doc.get_parsed("alpha")?,
        bins: doc.get_parsed("bins")?,
        n_old: doc.get_parsed("n_old")?,
        n_new: doc.get_parsed("n_new")?,
        seed: doc.get_parsed("seed")?,
    })
}

/// Explanation report: result, config echo, and links to the selected-sample
/// subsets plus the triggering shift report when one gated the run.
///
/// Linked artifacts live next to the report, so they are recorded by file
/// name; consumers resolve them against the report's directory. Full paths
/// with content hashes are in the manifest.
pub struct ExplanationDocContext<'a> {
    pub result: &'a ExplanationResult,
    pub config: &'a netsentry_core::explain::ExplainConfig,
    pub seed: u64,
    pub selected_old_csv: &'a Path,
    pub selected_new_csv: &'a Path,
    pub shift_report: Option<&'a Path>,
}

fn artifact_name(path: &Path) -> std::borrow::Cow<'_, str> {
    path.file_name()
        .map(|n| n.to_string_lossy())
        .unwrap_or_else(|| path.to_string_lossy())
}

pub fn explanation_doc(ctx: &ExplanationDocContext) -> Document {
    let mut doc = Document::new("explanation");
    doc.push("seed", ctx.seed);
    doc.push("lambda1", ctx.config.lambda1);
    doc.push("lambda2", ctx.config.lambda2);
    doc.push("iterations", ctx.config.iterations);
    doc.push("learning_rate", ctx.config.learning_rate);
    doc.push("rounding_threshold", ctx.config.rounding_threshold);
    doc.push("bins", ctx.config.bins);
    doc.push("relaxed_accuracy_loss", ctx.result.relaxed_accuracy_loss);
    doc.push("rounded_accuracy_loss", ctx.result.rounded_accuracy_loss);
    doc.push("computation_loss", ctx.result.computation_loss);
    doc.push("determinism_loss", ctx.result.determinism_loss);
    doc.push("relaxed_mean_old", ctx.result.relaxed_mean_old);
    doc.push("relaxed_mean_new", ctx.result.relaxed_mean_new);
    doc.push("iterations_run", ctx.result.iterations_run);
    doc.push("selected_old_count", ctx.result.selected_old.len());
    doc.push("selected_new_count", ctx.result.selected_new.len());
    doc.push_list("selected_old", ctx.result.selected_old.iter());
    doc.push_list("selected_new", ctx.result.selected_new.iter());
    doc.push("selected_old_csv", artifact_name(ctx.selected_old_csv));
    doc.push("selected_new_csv", artifact_name(ctx.selected_new_csv));
    if let Some(path) = ctx.shift_report {
        doc.push("shift_report", artifact_name(path));
    }
    doc
}

pub fn explanation_from_doc(doc: &Document) -> Result<ExplanationResult> {
    Ok(ExplanationResult {
        selected_old: doc.get_list("selected_old")?,
        selected_new: doc.get_list("selected_new")?,
        relaxed_accuracy_loss: doc.get_parsed("relaxed_accuracy_loss")?,
        rounded_accuracy_loss: doc.get_parsed("rounded_accuracy_loss")?,
        computation_loss: doc.get_parsed("computation_loss")?,
        determinism_loss: doc.get_parsed("determinism_loss")?,
        relaxed_mean_old: doc.get_parsed("relaxed_mean_old")?,
        relaxed_mean_new: doc.get_parsed("relaxed_mean_new")?,
        iterations_run: doc.get_parsed("iterations_run")?,
    })
}

pub fn metrics_doc(metrics: &MetricsReport, cm: &ConfusionMatrix) -> Document {
    let mut doc = Document::new("eval");
    doc.push("f1", metrics.f1);
    doc.push("accuracy", metrics.accuracy);
    doc.push("bacc", metrics.bacc);
    doc.push("mcc", metrics.mcc);
    doc.push("tpr", metrics.tpr);
    doc.push("tnr", metrics.tnr);
    doc.push("fpr", metrics.fpr);
    doc.push("true_positives", cm.true_positives);
    doc.push("false_positives", cm.false_positives);
    doc.push("true_negatives", cm.true_negatives);
    doc.push("false_negatives", cm.false_negatives);
    doc.push("samples", cm.total());
    doc
}

pub fn metrics_from_doc(doc: &Document) -> Result<MetricsReport> {
    Ok(MetricsReport {
        f1: doc.get_parsed("f1")?,
        accuracy: doc.get_parsed("accuracy")?,
        bacc: doc.get_parsed("bacc")?,
        mcc: doc.get_parsed("mcc")?,
        tpr: doc.get_parsed("tpr")?,
        tnr: doc.get_parsed("tnr")?,
        fpr: doc.get_parsed("fpr")?,
    })
}

pub fn adapt_doc(report: &AdaptReport, teacher_path: &Path, teacher_sha256: &str) -> Document {
    let mut doc = Document::new("adapt-report");
    doc.push("gamma", report.gamma);
    doc.push("epochs_run", report.epochs_run);
    doc.push("n_old", report.n_old);
    doc.push("n_new", report.n_new);
    doc.push_list("contrastive_trace", report.contrastive_trace.iter());
    doc.push_list("kd_trace", report.kd_trace.iter());
    doc.push("teacher_checkpoint", artifact_name(teacher_path));
    doc.push("teacher_sha256", teacher_sha256);
    doc
}

/// Wall-clock seconds for manifests; honors SOURCE_DATE_EPOCH so runs can be
/// made byte-reproducible.
pub fn manifest_timestamp() -> u64 {
    if let Ok(epoch) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(seconds) = epoch.parse() {
            return seconds;
        }
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Run manifest: config echo hash, inputs, and every produced artifact with
/// its content hash.
pub struct Manifest {
    doc: Document,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config_text: Option<&str>) -> Self {
        let mut doc = Document::new("manifest");
        doc.push("command", command);
        doc.push("version", env!("CARGO_PKG_VERSION"));
        doc.push("created_unix", manifest_timestamp());
        doc.push("seed", seed);
        if let Some(text) = config_text {
            doc.push("config_sha256", sha256_hex(text.as_bytes()));
        }
        Self { doc }
    }

    pub fn record_input(&mut self, name: &str, path: &Path) -> Result<()> {
        let hash = hash_file(path)?;
        self.doc
            .push(&format!("input {name}"), format!("{} sha256:{hash}", path.display()));
        Ok(())
    }

    pub fn record_output(&mut self, name: &str, path: &Path) -> Result<()> {
        let hash = hash_file(path)?;
        self.doc
            .push(&format!("output {name}"), format!("{} sha256:{hash}", path.display()));
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.doc.push(key, value);
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.doc.save(path)
    }
}

/// Writes a checkpoint under a content-hash versioned name, returning the
/// path. An existing file with the same name necessarily has identical
/// content and is left alone, so prior checkpoints are never overwritten.
pub fn write_versioned_checkpoint(
    checkpoint: &netsentry_core::Checkpoint,
    dir: &Path,
) -> Result<PathBuf> {
    let json = checkpoint.to_json()?;
    let hash = sha256_hex(json.as_bytes());
    let path = dir.join(format!("checkpoint-{}.json", &hash[..12]));
    if !path.exists() {
        fs::write(&path, json)?;
    }
    Ok(path)
}

/// Loads a checkpoint that must carry a fitted labeler.
pub fn load_fitted_checkpoint(
    path: &Path,
) -> Result<(netsentry_core::Autoencoder, netsentry_core::labeler::LabelerState)> {
    let checkpoint = netsentry_core::Checkpoint::load(path)?;
    let labeler = checkpoint.labeler.ok_or_else(|| {
        Error::InvalidData(format!(
            "checkpoint {} has no fitted labeler state",
            path.display()
        ))
    })?;
    Ok((checkpoint.model, labeler))
}

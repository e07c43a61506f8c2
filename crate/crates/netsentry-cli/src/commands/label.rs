//! `label`: pseudo-label a CSV of arrivals.
//!
//! Feature cells are copied through verbatim; the label column holds the
//! pseudo-labels (replacing any label column the input carried).

use std::fs;
use std::path::PathBuf;

use netsentry_core::error::{Error, Result};

use crate::config::PipelineConfig;
use crate::report::{load_fitted_checkpoint, Manifest};

use super::RunContext;

pub struct LabelOutcome {
    pub labeled_csv: PathBuf,
    pub manifest_path: PathBuf,
    pub rows: usize,
}

pub fn run_label(ctx: &RunContext) -> Result<LabelOutcome> {
    let checkpoint_path = PipelineConfig::require(&ctx.config.data.checkpoint, "checkpoint")?;
    let input_path = PipelineConfig::require(&ctx.config.data.unlabeled, "unlabeled")?;
    let (model, labeler) = load_fitted_checkpoint(&checkpoint_path)?;

    let text = fs::read_to_string(&input_path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or(Error::CsvParse {
        line: 1,
        message: "empty file".into(),
    })?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let labeled_input = columns.last() == Some(&"label");
    let feature_dim = if labeled_input {
        columns.len() - 1
    } else {
        columns.len()
    };
    if feature_dim == 0 {
        return Err(Error::CsvParse {
            line: 1,
            message: "no feature columns in header".into(),
        });
    }

    let mut out = String::new();
    for i in 0..feature_dim {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("f{i}"));
    }
    out.push_str(",label\n");

    let mut rows = 0usize;
    let mut features = Vec::with_capacity(feature_dim);
    for (idx, raw) in lines.enumerate() {
        let line_no = idx + 2;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let expected = feature_dim + usize::from(labeled_input);
        if cells.len() != expected {
            return Err(Error::CsvParse {
                line: line_no,
                message: format!("expected {expected} cells, found {}", cells.len()),
            });
        }
        features.clear();
        for (i, cell) in cells[..feature_dim].iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::CsvParse {
                line: line_no,
                message: format!("feature f{i} is not numeric: {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::CsvParse {
                    line: line_no,
                    message: format!("feature f{i} is not finite: {cell:?}"),
                });
            }
            features.push(value);
        }
        let label = labeler.pseudo_label(&model, &features)?;
        out.push_str(&cells[..feature_dim].join(","));
        out.push(',');
        out.push_str(&label.as_bit().to_string());
        out.push('\n');
        rows += 1;
    }
    if rows == 0 {
        log::warn!("{} has no data rows; writing header only", input_path.display());
    }

    ctx.ensure_out_dir()?;
    let labeled_csv = ctx.out_dir.join("labeled.csv");
    fs::write(&labeled_csv, out)?;

    let mut manifest = Manifest::new("label", ctx.seed, ctx.config_text.as_deref());
    manifest.record_input("checkpoint", &checkpoint_path)?;
    manifest.record_input("unlabeled", &input_path)?;
    manifest.record_output("labeled", &labeled_csv)?;
    manifest.note("rows", rows);
    let manifest_path = ctx.out_dir.join("label.manifest");
    manifest.save(&manifest_path)?;

    Ok(LabelOutcome {
        labeled_csv,
        manifest_path,
        rows,
    })
}

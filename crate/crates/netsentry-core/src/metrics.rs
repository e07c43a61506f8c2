//! Classification metrics from a confusion matrix.
//!
//! The abnormal class (label 1) is the positive class. Degenerate 0/0 ratios
//! are defined as 0, so constant predictors score as uninformative.

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

/// Confusion counts with abnormal as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }
}

/// Counts prediction/truth agreement; labels are positionally aligned.
pub fn confusion(predictions: &[Label], truths: &[Label]) -> Result<ConfusionMatrix> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            actual: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput("predictions"));
    }
    let mut cm = ConfusionMatrix {
        true_positives: 0,
        false_positives: 0,
        true_negatives: 0,
        false_negatives: 0,
    };
    for (&pred, &truth) in predictions.iter().zip(truths) {
        match (pred, truth) {
            (Label::Abnormal, Label::Abnormal) => cm.true_positives += 1,
            (Label::Abnormal, Label::Normal) => cm.false_positives += 1,
            (Label::Normal, Label::Normal) => cm.true_negatives += 1,
            (Label::Normal, Label::Abnormal) => cm.false_negatives += 1,
        }
    }
    Ok(cm)
}

/// Derived classification metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub f1: f64,
    pub accuracy: f64,
    pub bacc: f64,
    pub mcc: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub fpr: f64,
}

fn ratio(numerator: f64, denominator: f64) -> f64 {
    if denominator == 0.0 {
        0.0
    } else {
        numerator / denominator
    }
}

/// Computes F1, accuracy, balanced accuracy, Matthews correlation, and the
/// rate triple from a confusion matrix.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    if cm.total() == 0 {
        return Err(Error::EmptyInput("confusion matrix"));
    }
    let tp = cm.true_positives as f64;
    let fp = cm.false_positives as f64;
    let tn = cm.true_negatives as f64;
    let fn_ = cm.false_negatives as f64;

    let tpr = ratio(tp, tp + fn_);
    let tnr = ratio(tn, tn + fp);
    let fpr = ratio(fp, fp + tn);
    let f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn_);
    let accuracy = (tp + tn) / cm.total() as f64;
    let bacc = (tpr + tnr) / 2.0;
    let mcc_denominator = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = ratio(tp * tn - fp * fn_, mcc_denominator);

    Ok(MetricsReport {
        f1,
        accuracy,
        bacc,
        mcc,
        tpr,
        tnr,
        fpr,
    })
}

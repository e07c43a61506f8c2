//! Flow record samples and class labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary class label: 0 is normal traffic, 1 is abnormal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Normal,
    Abnormal,
}

impl Label {
    pub fn from_bit(bit: u8) -> Result<Self> {
        match bit {
            0 => Ok(Label::Normal),
            1 => Ok(Label::Abnormal),
            other => Err(Error::InvalidData(format!(
                "label must be 0 or 1, got {other}"
            ))),
        }
    }

    pub fn as_bit(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::Abnormal => 1,
        }
    }

    pub fn is_normal(self) -> bool {
        self == Label::Normal
    }
}

/// One network flow record: standardized real features plus its class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: Label,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, label: Label) -> Self {
        Self { features, label }
    }
}

/// Counts of (normal, abnormal) samples.
pub fn class_counts(samples: &[LabeledSample]) -> (usize, usize) {
    let normals = samples.iter().filter(|s| s.label.is_normal()).count();
    (normals, samples.len() - normals)
}

/// Checks a feature vector for the expected dimension and finite entries.
pub fn validate_features(features: &[f64], dim: usize) -> Result<()> {
    if features.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: features.len(),
        });
    }
    if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidData(format!(
            "non-finite feature value at index {pos}"
        )));
    }
    Ok(())
}

/// Validates every sample in a dataset against a fixed feature dimension.
pub fn validate_dataset(samples: &[LabeledSample], dim: usize) -> Result<()> {
    for sample in samples {
        validate_features(&sample.features, dim)?;
    }
    Ok(())
}

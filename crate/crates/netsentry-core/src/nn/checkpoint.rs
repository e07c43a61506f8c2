//! Versioned model persistence.
//!
//! A checkpoint is a self-describing JSON document holding the architecture
//! dims, activation tags, row-major 64-bit parameter arrays, and — once
//! fitted — the labeler state. Floats are written in their shortest
//! round-trippable decimal form, so a write/read cycle is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeler::LabelerState;
use crate::nn::Autoencoder;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: Autoencoder,
    pub labeler: Option<LabelerState>,
}

impl Checkpoint {
    pub fn new(model: Autoencoder, labeler: Option<LabelerState>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            model,
            labeler,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        // serde_json writes non-finite floats as null, which would corrupt
        // the round trip; reject them up front.
        self.model.validate_finite()?;
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let checkpoint: Checkpoint = serde_json::from_str(text)?;
        if checkpoint.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: checkpoint.version,
                supported: CHECKPOINT_VERSION,
            });
        }
        Ok(checkpoint)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

//! Continual anomaly detection for network flow records.
//!
//! The engine trains a contrastive autoencoder over labeled flows, assigns
//! pseudo-labels to new traffic by distribution-level voting between the
//! encoder and decoder representations, detects normality shifts with a
//! KL-statistic permutation test over posterior histograms, explains a shift
//! by selecting a minimal sample subset through relaxed mask optimization,
//! and adapts with teacher-student fine-tuning under a similarity-preserving
//! distillation loss.

pub mod adapt;
pub mod contrastive;
pub mod data;
pub mod error;
pub mod explain;
pub mod gradcheck;
pub mod labeler;
pub mod metrics;
pub mod nn;
pub mod shift;
pub mod simulate;

pub use data::{LabeledSample, Label};
pub use error::{Error, ErrorClass, Result};
pub use nn::checkpoint::Checkpoint;
pub use nn::{Architecture, Autoencoder, EmbeddingPair};

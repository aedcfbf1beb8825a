//! Objective variants assembled from the [`crate::nncore`] cells.

mod checkpoint;
mod config;
mod model;
mod params;

pub use checkpoint::{Checkpoint, TrainingRecord, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{EncoderKind, ModelConfig};
pub use model::{build_model, Model};
pub use params::{DecoderParams, Params};

pub use crate::corpus::Variant;

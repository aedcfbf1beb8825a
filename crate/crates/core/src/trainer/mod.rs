//! Mini-batch training: batch-mean gradients, element-wise clipping, ADAM.

mod adam;
mod clip;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use clip::{clip_gradient, clip_params};
pub use train::{train, NoObserver, StepInfo, TrainConfig, TrainObserver, TrainOutcome};

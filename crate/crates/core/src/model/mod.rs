//! Compact 1D residual network: wide strided stem convolution, `N` residual
//! blocks of small-kernel convolutions, two fully connected layers and a
//! sigmoid output. Forward and backward passes are hand-written over flat
//! `f64` buffers.

mod adam;
mod config;
mod layers;
mod loss;
mod network;
mod sampling;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use config::{param_count, ModelConfig, ParamLayout, Shapes};
pub use loss::{bce_loss, batch_bce};
pub use network::{gradient_check, init_weights, BatchStats, ForwardCache, ModelWeights};
pub use sampling::downsample_majority;
pub use train::{predict_cleaned, predict_recording, train, EpochLog, LabeledRecord, TrainHyper, TrainRun};

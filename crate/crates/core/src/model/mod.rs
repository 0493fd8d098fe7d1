//! A two-layer convolutional pixel classifier trained with Adam.

mod adam;
mod net;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use net::{Activations, TinyNet, HIDDEN_CHANNELS};
pub use train::{
    evaluate, fit, train, EpochRow, Evaluation, RunRecord, TrainConfig, RUN_RECORD_HEADER,
};

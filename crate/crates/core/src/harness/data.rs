use std::path::PathBuf;

use crate::error::Result;
use crate::loss::LossSpec;
use crate::model::{AdamConfig, TrainConfig};
use crate::synth::{self, Sample, SynthSpec};

/// Where an experiment gets its samples.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SynthSpec),
    /// A `manifest.csv` as written by `gendata`.
    Manifest(PathBuf),
}

impl DataSource {
    /// Loads and splits the data. The split is keyed by `split_seed`.
    pub fn load_split(&self, ratio: f64, split_seed: u64) -> Result<(Vec<Sample>, Vec<Sample>)> {
        let samples = match self {
            DataSource::Synthetic(spec) => synth::generate(spec)?,
            DataSource::Manifest(path) => synth::load_manifest(path)?,
        };
        synth::train_val_split(samples, ratio, split_seed)
    }
}

/// Optimizer and schedule shared by every run of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch_size: 16,
            epochs: 50,
        }
    }
}

impl TrainSettings {
    pub fn config(&self, loss: LossSpec, seed: u64) -> TrainConfig {
        TrainConfig {
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            ..TrainConfig::new(loss, seed)
        }
    }
}

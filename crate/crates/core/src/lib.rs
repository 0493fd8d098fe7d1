//! Adaptive logarithmic loss for imbalanced binary segmentation.
//!
//! * [`loss`]: soft Jaccard, Dice, Tversky, focal, combo and focal-Tversky
//!   losses with analytic gradients, the adaptive logarithmic wrapper, and a
//!   finite-difference gradient oracle.
//! * [`metrics`]: confusion counts, overlap metrics and pooled ROC.
//! * [`synth`]: seeded synthetic datasets and 8-bit PGM I/O.
//! * [`model`]: a tiny convolutional segmenter with manual backprop and Adam.
//! * [`harness`]: the experiment drivers behind the `alloss` CLI.

pub mod error;
pub mod harness;
pub mod loss;
mod mask;
pub mod metrics;
pub mod model;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
pub use loss::{AllParams, BaseLoss, LossEval, LossSpec};
pub use mask::{BinMask, ProbMap};
pub use metrics::{ConfusionCounts, RocCurve};
pub use model::{RunRecord, TinyNet, TrainConfig};
pub use synth::{Sample, SynthSpec};

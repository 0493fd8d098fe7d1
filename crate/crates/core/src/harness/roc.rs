use std::io::Write;

use crate::error::Result;
use crate::loss::LossSpec;
use crate::mask::BinMask;
use crate::metrics::{self, pair_counting_auc, RocCurve};
use crate::model::{self, TinyNet};
use crate::report::fmt_num;

use super::{run_seed, DataSource, TrainSettings};

/// The model whose validation ROC is measured.
#[derive(Debug, Clone, PartialEq)]
pub enum RocModel {
    /// All-zero weights: every pixel scores 0.5.
    Untrained,
    Trained {
        loss: LossSpec,
        train: TrainSettings,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocSpec {
    pub model: RocModel,
    pub data: DataSource,
    pub split_ratio: f64,
    pub seed: u64,
    pub n_thresholds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocReport {
    pub curve: RocCurve,
    /// Exact Mann-Whitney AUC over the same pooled pixels.
    pub pair_auc: f64,
}

pub const ROC_HEADER: [&str; 3] = ["threshold", "fpr", "tpr"];

pub fn run_roc(spec: &RocSpec) -> Result<RocReport> {
    let (train_set, val_set) = spec.data.load_split(spec.split_ratio, spec.seed)?;
    let net = match &spec.model {
        RocModel::Untrained => TinyNet::zeros(),
        RocModel::Trained { loss, train } => {
            let cfg = train.config(*loss, run_seed(spec.seed, 0));
            model::fit(&cfg, &train_set, &val_set)?.0
        }
    };
    let probs: Vec<_> = val_set.iter().map(|s| net.forward(&s.image)).collect();
    let masks: Vec<BinMask> = val_set.iter().map(|s| s.mask.clone()).collect();
    let curve = metrics::roc_auc(&probs, &masks, spec.n_thresholds)?;
    let scores: Vec<f64> = probs
        .iter()
        .flat_map(|p| p.values().iter().copied())
        .collect();
    let labels: Vec<bool> = masks
        .iter()
        .flat_map(|m| m.values().iter().map(|&v| v == 1))
        .collect();
    Ok(RocReport {
        curve,
        pair_auc: pair_counting_auc(&scores, &labels)?,
    })
}

impl RocReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(ROC_HEADER)?;
        for &(t, fpr, tpr) in &self.curve.points {
            w.write_record([fmt_num(t), fmt_num(fpr), fmt_num(tpr)])?;
        }
        w.flush()?;
        Ok(())
    }
}

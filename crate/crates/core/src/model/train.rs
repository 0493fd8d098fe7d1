use std::io::Write;

use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::mask::{BinMask, ProbMap};
use crate::metrics::{self, ConfusionCounts, DEFAULT_ROC_THRESHOLDS};
use crate::report::fmt_num;
use crate::synth::rng::Stream;
use crate::synth::Sample;

use super::{AdamConfig, AdamState, TinyNet};

const SHUFFLE_TAG: u64 = 0x5348_5546; // "SHUF"

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub loss: LossSpec,
    pub seed: u64,
    /// Binarization threshold for validation metrics.
    pub threshold: f64,
}

impl TrainConfig {
    pub fn new(loss: LossSpec, seed: u64) -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 16,
            max_epochs: 50,
            loss,
            seed,
            threshold: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs", "must be at least 1"));
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::invalid(
                "lr",
                format!("must be positive, got {}", self.adam.lr),
            ));
        }
        Ok(())
    }
}

/// Validation metrics after one epoch. Ratio metrics are averaged over
/// images; `val_jaccard_micro` pools every validation pixel.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_jaccard: f64,
    pub val_dice: f64,
    pub val_recall: f64,
    pub val_specificity: f64,
    pub val_f1: f64,
    pub val_jaccard_micro: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<EpochRow>,
    /// Pooled-pixel ROC AUC on the validation set after the last epoch;
    /// `None` when the validation set has a single class.
    pub final_auc: Option<f64>,
    pub optimizer_steps: u64,
}

pub const RUN_RECORD_HEADER: [&str; 7] = [
    "epoch",
    "train_loss",
    "val_jaccard",
    "val_dice",
    "val_recall",
    "val_specificity",
    "val_f1",
];

impl RunRecord {
    pub fn last(&self) -> &EpochRow {
        self.rows.last().expect("at least one epoch")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RUN_RECORD_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.epoch.to_string(),
                fmt_num(r.train_loss),
                fmt_num(r.val_jaccard),
                fmt_num(r.val_dice),
                fmt_num(r.val_recall),
                fmt_num(r.val_specificity),
                fmt_num(r.val_f1),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Predictions and thresholded metrics over a sample set.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub probs: Vec<ProbMap>,
    pub per_image: Vec<ConfusionCounts>,
}

impl Evaluation {
    fn macro_mean(&self, metric: impl Fn(&ConfusionCounts) -> f64) -> f64 {
        self.per_image.iter().map(metric).sum::<f64>() / self.per_image.len() as f64
    }

    pub fn pooled(&self) -> ConfusionCounts {
        self.per_image.iter().copied().sum()
    }

    pub fn auc(&self, masks: &[BinMask]) -> Result<f64> {
        Ok(metrics::roc_auc(&self.probs, masks, DEFAULT_ROC_THRESHOLDS)?.auc)
    }
}

pub fn evaluate(net: &TinyNet, samples: &[Sample], threshold: f64) -> Result<Evaluation> {
    let probs: Vec<ProbMap> = samples.iter().map(|s| net.forward(&s.image)).collect();
    let per_image = probs
        .iter()
        .zip(samples)
        .map(|(p, s)| metrics::confusion(p, &s.mask, threshold))
        .collect::<Result<_>>()?;
    Ok(Evaluation { probs, per_image })
}

pub fn train(config: &TrainConfig, train_set: &[Sample], val_set: &[Sample]) -> Result<RunRecord> {
    fit(config, train_set, val_set).map(|(_, record)| record)
}

/// Trains a freshly initialized network. Mini-batches keep their remainder,
/// so an epoch takes `ceil(n / batch_size)` optimizer steps. Per-image loss
/// gradients are averaged over the batch.
pub fn fit(
    config: &TrainConfig,
    train_set: &[Sample],
    val_set: &[Sample],
) -> Result<(TinyNet, RunRecord)> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::invalid(
            "dataset",
            "training and validation sets must be non-empty",
        ));
    }
    let mut net = TinyNet::init(config.seed);
    let mut adam = AdamState::new(TinyNet::PARAM_COUNT, config.adam);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut rows = Vec::with_capacity(config.max_epochs);
    let mut grads = vec![0.0; TinyNet::PARAM_COUNT];

    for epoch in 1..=config.max_epochs {
        order.sort_unstable();
        Stream::derived(config.seed, &[SHUFFLE_TAG, epoch as u64]).shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            grads.fill(0.0);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let sample = &train_set[i];
                let acts = net.forward_trace(&sample.image);
                let eval = config.loss.eval(&acts.output, &sample.mask)?;
                if !eval.value.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        batch,
                        loss: eval.value,
                    });
                }
                loss_sum += eval.value;
                let upstream: Vec<f64> = eval.grad.iter().map(|g| g * scale).collect();
                let g = net.backward(&sample.image, &acts, &upstream)?;
                grads.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    batch,
                    loss: f64::NAN,
                });
            }
            adam.step(net.params_mut(), &grads);
        }

        let eval = evaluate(&net, val_set, config.threshold)?;
        rows.push(EpochRow {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_jaccard: eval.macro_mean(ConfusionCounts::jaccard),
            val_dice: eval.macro_mean(ConfusionCounts::dice),
            val_recall: eval.macro_mean(ConfusionCounts::recall),
            val_specificity: eval.macro_mean(ConfusionCounts::specificity),
            val_f1: eval.macro_mean(ConfusionCounts::f_measure),
            val_jaccard_micro: eval.pooled().jaccard(),
        });
    }

    let masks: Vec<BinMask> = val_set.iter().map(|s| s.mask.clone()).collect();
    let final_auc = match evaluate(&net, val_set, config.threshold)?.auc(&masks) {
        Ok(auc) => Some(auc),
        Err(Error::UndefinedAuc(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((
        net,
        RunRecord {
            rows,
            final_auc,
            optimizer_steps: adam.steps_taken(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{BaseLoss, LossSpec};
    use crate::synth::{generate, SynthSpec};

    fn data(n: usize, seed: u64) -> Vec<Sample> {
        generate(&SynthSpec {
            width: 16,
            height: 16,
            fg_fraction_target: 0.2,
            n_images: n,
            noise_sigma: 0.05,
            blob_count_range: (1, 2),
            seed,
        })
        .unwrap()
    }

    #[test]
    fn step_count_is_batch_arithmetic() {
        let train_set = data(32, 1);
        let val = data(4, 2);
        let cfg = TrainConfig {
            max_epochs: 1,
            ..TrainConfig::new(LossSpec::plain(BaseLoss::Dice), 0)
        };
        let rec = train(&cfg, &train_set, &val).unwrap();
        assert_eq!(rec.optimizer_steps, 2);
        assert_eq!(rec.rows.len(), 1);

        let odd = train(&cfg, &train_set[..17], &val).unwrap();
        assert_eq!(odd.optimizer_steps, 2);
    }

    #[test]
    fn runs_are_reproducible() {
        let train_set = data(20, 3);
        let val = data(5, 4);
        let cfg = TrainConfig {
            max_epochs: 3,
            batch_size: 4,
            adam: AdamConfig {
                lr: 1e-2,
                ..AdamConfig::default()
            },
            ..TrainConfig::new("all-dice".parse().unwrap(), 7)
        };
        assert_eq!(
            train(&cfg, &train_set, &val).unwrap(),
            train(&cfg, &train_set, &val).unwrap()
        );
    }

    #[test]
    fn invalid_config_rejected() {
        let s = data(4, 1);
        let mut cfg = TrainConfig::new(LossSpec::plain(BaseLoss::Dice), 0);
        cfg.batch_size = 0;
        assert!(train(&cfg, &s, &s).is_err());
        cfg.batch_size = 2;
        cfg.max_epochs = 0;
        assert!(train(&cfg, &s, &s).is_err());
        cfg.max_epochs = 1;
        assert!(train(&cfg, &s, &[]).is_err());
    }

    #[test]
    fn run_record_csv_schema() {
        let rec = RunRecord {
            rows: vec![EpochRow {
                epoch: 1,
                train_loss: 0.5,
                val_jaccard: 0.25,
                val_dice: 0.4,
                val_recall: 1.0,
                val_specificity: 0.125,
                val_f1: 1.0 / 3.0,
                val_jaccard_micro: 0.3,
            }],
            final_auc: None,
            optimizer_steps: 1,
        };
        let mut out = Vec::new();
        rec.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "epoch,train_loss,val_jaccard,val_dice,val_recall,val_specificity,val_f1\n\
             1,0.5,0.25,0.4,1,0.125,0.333333\n"
        );
    }
}

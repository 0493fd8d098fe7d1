use std::io::Write;

use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::model::{self, EpochRow};
use crate::report::fmt_num;

use super::{mean, par_map, run_seed, DataSource, TrainSettings};

/// Train one model per (loss, seed) on a shared split.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareSpec {
    pub losses: Vec<LossSpec>,
    pub seeds: usize,
    pub base_seed: u64,
    pub data: DataSource,
    pub split_ratio: f64,
    pub train: TrainSettings,
}

/// Final validation metrics of one run and its per-epoch trace.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRun {
    pub loss: String,
    pub seed_index: usize,
    pub seed: u64,
    pub recall: f64,
    pub specificity: f64,
    pub jaccard: f64,
    pub jaccard_micro: f64,
    pub dice: f64,
    pub f1: f64,
    /// NaN when the validation set has one class.
    pub auc: f64,
    pub trace: Vec<EpochRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossMean {
    pub loss: String,
    pub recall: f64,
    pub specificity: f64,
    pub jaccard: f64,
    pub jaccard_micro: f64,
    pub dice: f64,
    pub f1: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub runs: Vec<CompareRun>,
    pub means: Vec<LossMean>,
}

pub const COMPARE_HEADER: [&str; 10] = [
    "row_type",
    "loss",
    "seed",
    "recall",
    "specificity",
    "jaccard",
    "jaccard_micro",
    "dice",
    "f1",
    "auc",
];

pub const TRACE_HEADER: [&str; 9] = [
    "loss",
    "seed",
    "epoch",
    "train_loss",
    "val_jaccard",
    "val_dice",
    "val_recall",
    "val_specificity",
    "val_f1",
];

pub fn run_compare(spec: &CompareSpec, jobs: usize) -> Result<CompareReport> {
    if spec.losses.is_empty() {
        return Err(Error::invalid("losses", "need at least one loss"));
    }
    if spec.seeds == 0 {
        return Err(Error::invalid("seeds", "need at least one seed"));
    }
    let (train_set, val_set) = spec.data.load_split(spec.split_ratio, spec.base_seed)?;
    let tasks: Vec<(usize, usize)> = (0..spec.losses.len())
        .flat_map(|l| (0..spec.seeds).map(move |s| (l, s)))
        .collect();
    let runs = par_map(jobs, tasks, |(l, seed_index)| {
        let loss = spec.losses[l];
        let seed = run_seed(spec.base_seed, seed_index);
        let rec = model::train(&spec.train.config(loss, seed), &train_set, &val_set)?;
        let last = rec.last();
        Ok(CompareRun {
            loss: loss.label(),
            seed_index,
            seed,
            recall: last.val_recall,
            specificity: last.val_specificity,
            jaccard: last.val_jaccard,
            jaccard_micro: last.val_jaccard_micro,
            dice: last.val_dice,
            f1: last.val_f1,
            auc: rec.final_auc.unwrap_or(f64::NAN),
            trace: rec.rows,
        })
    })?;
    let means = spec
        .losses
        .iter()
        .enumerate()
        .map(|(l, loss)| {
            let mine = &runs[l * spec.seeds..(l + 1) * spec.seeds];
            let avg = |f: fn(&CompareRun) -> f64| mean(mine.iter().map(f));
            LossMean {
                loss: loss.label(),
                recall: avg(|r| r.recall),
                specificity: avg(|r| r.specificity),
                jaccard: avg(|r| r.jaccard),
                jaccard_micro: avg(|r| r.jaccard_micro),
                dice: avg(|r| r.dice),
                f1: avg(|r| r.f1),
                auc: avg(|r| r.auc),
            }
        })
        .collect();
    Ok(CompareReport { runs, means })
}

/// First epoch whose validation Jaccard reaches `fraction` of the final one.
pub fn epochs_to_fraction(trace: &[EpochRow], fraction: f64) -> Option<usize> {
    let target = fraction * trace.last()?.val_jaccard;
    trace
        .iter()
        .find(|r| r.val_jaccard >= target)
        .map(|r| r.epoch)
}

impl CompareReport {
    pub fn runs_for<'a>(&'a self, loss: &'a str) -> impl Iterator<Item = &'a CompareRun> + 'a {
        self.runs.iter().filter(move |r| r.loss == loss)
    }

    pub fn mean_for(&self, loss: &str) -> Option<&LossMean> {
        self.means.iter().find(|m| m.loss == loss)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(COMPARE_HEADER)?;
        for r in &self.runs {
            w.write_record([
                "run".to_string(),
                r.loss.clone(),
                r.seed.to_string(),
                fmt_num(r.recall),
                fmt_num(r.specificity),
                fmt_num(r.jaccard),
                fmt_num(r.jaccard_micro),
                fmt_num(r.dice),
                fmt_num(r.f1),
                fmt_num(r.auc),
            ])?;
        }
        for m in &self.means {
            w.write_record([
                "mean".to_string(),
                m.loss.clone(),
                String::new(),
                fmt_num(m.recall),
                fmt_num(m.specificity),
                fmt_num(m.jaccard),
                fmt_num(m.jaccard_micro),
                fmt_num(m.dice),
                fmt_num(m.f1),
                fmt_num(m.auc),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-epoch validation metrics of every run.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_HEADER)?;
        for r in &self.runs {
            for e in &r.trace {
                w.write_record([
                    r.loss.clone(),
                    r.seed.to_string(),
                    e.epoch.to_string(),
                    fmt_num(e.train_loss),
                    fmt_num(e.val_jaccard),
                    fmt_num(e.val_dice),
                    fmt_num(e.val_recall),
                    fmt_num(e.val_specificity),
                    fmt_num(e.val_f1),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

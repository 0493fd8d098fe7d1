//! Threshold metrics and pooled-pixel ROC.
//!
//! Ratio metrics whose denominator is zero evaluate to 1.0 (there was
//! nothing to get wrong) and emit a `log` warning, once per metric per
//! process; repeats are logged at debug level.

use std::ops::{Add, AddAssign};
use std::sync::Mutex;

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::mask::{ensure_same_dims, BinMask, ProbMap};

/// Pixel tallies of a thresholded prediction against ground truth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn new(true_pos: u64, false_pos: u64, true_neg: u64, false_neg: u64) -> Self {
        Self {
            true_pos,
            false_pos,
            true_neg,
            false_neg,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn jaccard(&self) -> f64 {
        jaccard_index(self)
    }

    pub fn dice(&self) -> f64 {
        dice_index(self)
    }

    pub fn recall(&self) -> f64 {
        recall(self)
    }

    pub fn specificity(&self) -> f64 {
        specificity(self)
    }

    pub fn precision(&self) -> f64 {
        precision(self)
    }

    pub fn f_measure(&self) -> f64 {
        f_measure(self)
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.true_pos += rhs.true_pos;
        self.false_pos += rhs.false_pos;
        self.true_neg += rhs.true_neg;
        self.false_neg += rhs.false_neg;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// A pixel is predicted foreground iff `p_i >= threshold`.
pub fn confusion(p: &ProbMap, g: &BinMask, threshold: f64) -> Result<ConfusionCounts> {
    ensure_same_dims(p, g)?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(
            "threshold",
            format!("must lie in [0, 1], got {threshold}"),
        ));
    }
    let mut c = ConfusionCounts::default();
    for (&pi, &gi) in p.values().iter().zip(g.values()) {
        match (pi >= threshold, gi == 1) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, false) => c.true_neg += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    Ok(c)
}

static WARNED: Mutex<Vec<&'static str>> = Mutex::new(Vec::new());

fn ratio(num: u64, den: u64, metric: &'static str) -> f64 {
    if den == 0 {
        let mut warned = WARNED.lock().unwrap_or_else(|e| e.into_inner());
        if warned.contains(&metric) {
            debug!("{metric}: zero denominator, reporting 1.0");
        } else {
            warned.push(metric);
            warn!("{metric}: zero denominator, reporting 1.0 (further occurrences logged at debug level)");
        }
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn jaccard_index(c: &ConfusionCounts) -> f64 {
    ratio(
        c.true_pos,
        c.true_pos + c.false_pos + c.false_neg,
        "jaccard",
    )
}

pub fn dice_index(c: &ConfusionCounts) -> f64 {
    ratio(
        2 * c.true_pos,
        2 * c.true_pos + c.false_pos + c.false_neg,
        "dice",
    )
}

pub fn recall(c: &ConfusionCounts) -> f64 {
    ratio(c.true_pos, c.true_pos + c.false_neg, "recall")
}

/// True negative rate.
pub fn specificity(c: &ConfusionCounts) -> f64 {
    ratio(c.true_neg, c.true_neg + c.false_pos, "specificity")
}

pub fn precision(c: &ConfusionCounts) -> f64 {
    ratio(c.true_pos, c.true_pos + c.false_pos, "precision")
}

/// Harmonic mean of precision and recall.
pub fn f_measure(c: &ConfusionCounts) -> f64 {
    let (p, r) = (precision(c), recall(c));
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Receiver operating characteristic sampled at evenly spaced thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(threshold, fpr, tpr)`, from the strictest threshold down to 0.
    /// The first point is a sentinel above every score and sits at (0, 0).
    pub points: Vec<(f64, f64, f64)>,
    pub auc: f64,
}

pub const DEFAULT_ROC_THRESHOLDS: usize = 256;

/// Micro-averaged ROC over every pixel of every image.
pub fn roc_auc(p: &[ProbMap], g: &[BinMask], n_thresholds: usize) -> Result<RocCurve> {
    if p.len() != g.len() {
        return Err(Error::Contract(format!(
            "{} probability maps but {} masks",
            p.len(),
            g.len()
        )));
    }
    for (pi, gi) in p.iter().zip(g) {
        ensure_same_dims(pi, gi)?;
    }
    let scores = p.iter().flat_map(|m| m.values().iter().copied());
    let labels = g.iter().flat_map(|m| m.values().iter().map(|&v| v == 1));
    roc_from_scores(scores, labels, n_thresholds)
}

/// ROC of arbitrary scores in `[0, 1]` against boolean labels.
pub fn roc_from_scores(
    scores: impl IntoIterator<Item = f64>,
    labels: impl IntoIterator<Item = bool>,
    n_thresholds: usize,
) -> Result<RocCurve> {
    if n_thresholds < 2 {
        return Err(Error::invalid(
            "n_thresholds",
            format!("need at least 2, got {n_thresholds}"),
        ));
    }
    let steps = (n_thresholds - 1) as f64;
    // pos_hist[k] counts positives whose highest passed threshold index is k.
    let mut pos_hist = vec![0u64; n_thresholds];
    let mut neg_hist = vec![0u64; n_thresholds];
    let mut scores = scores.into_iter();
    for label in labels {
        let s = scores
            .next()
            .ok_or_else(|| Error::Contract("fewer scores than labels".into()))?;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Contract(format!("score {s} outside [0, 1]")));
        }
        let k = highest_passed_threshold(s, steps, n_thresholds);
        if label {
            pos_hist[k] += 1;
        } else {
            neg_hist[k] += 1;
        }
    }
    if scores.next().is_some() {
        return Err(Error::Contract("more scores than labels".into()));
    }
    let n_pos: u64 = pos_hist.iter().sum();
    let n_neg: u64 = neg_hist.iter().sum();
    if n_pos == 0 {
        return Err(Error::UndefinedAuc("negative"));
    }
    if n_neg == 0 {
        return Err(Error::UndefinedAuc("positive"));
    }

    let mut points = Vec::with_capacity(n_thresholds + 1);
    points.push((f64::INFINITY, 0.0, 0.0));
    let (mut tp, mut fp) = (0u64, 0u64);
    for k in (0..n_thresholds).rev() {
        tp += pos_hist[k];
        fp += neg_hist[k];
        points.push((
            k as f64 / steps,
            fp as f64 / n_neg as f64,
            tp as f64 / n_pos as f64,
        ));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) * (w[1].2 + w[0].2) * 0.5)
        .sum();
    Ok(RocCurve { points, auc })
}

/// Largest `k` with `k / steps <= s`.
fn highest_passed_threshold(s: f64, steps: f64, n: usize) -> usize {
    let mut k = ((s * steps).floor() as usize).min(n - 1);
    while k + 1 < n && (k + 1) as f64 / steps <= s {
        k += 1;
    }
    while k > 0 && k as f64 / steps > s {
        k -= 1;
    }
    k
}

/// AUC as the probability that a random positive outscores a random
/// negative, ties counting one half (Mann-Whitney statistic).
pub fn pair_counting_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Contract("score and label counts differ".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 {
        return Err(Error::UndefinedAuc("negative"));
    }
    if n_neg == 0.0 {
        return Err(Error::UndefinedAuc("positive"));
    }
    // Walk tie groups in ascending score order, counting negatives strictly below.
    let mut wins = 0.0;
    let mut neg_below = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let group = &order[i..j];
        let pos = group.iter().filter(|&&k| labels[k]).count() as f64;
        let neg = group.len() as f64 - pos;
        wins += pos * (neg_below + 0.5 * neg);
        neg_below += neg;
        i = j;
    }
    Ok(wins / (n_pos * n_neg))
}

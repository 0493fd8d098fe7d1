//! Finite-difference verification of loss gradients, alone and composed
//! with the network.

use std::io::Write;

use crate::error::{Error, Result};
use crate::loss::{finite_difference_grad, max_relative_error, LossSpec, PROB_CLIP};
use crate::mask::{BinMask, ProbMap};
use crate::model::TinyNet;
use crate::report::fmt_num;
use crate::synth::rng::Stream;

/// Probabilities closer than this to 0 or 1 are not compared.
const BOUNDARY_MARGIN: f64 = 1e-4;
/// Base-loss values closer than this to γ are resampled or skipped.
const BRANCH_MARGIN: f64 = 1e-4;
const LOSS_STEP: f64 = 1e-6;
const WEIGHT_STEP: f64 = 1e-5;
const NET_SIDE: usize = 8;
const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckSpec {
    pub loss: LossSpec,
    /// Random `(p, g)` pairs checked at loss level.
    pub loss_trials: usize,
    /// Random networks checked end to end.
    pub net_trials: usize,
    pub weights_per_net: usize,
    pub tolerance: f64,
    pub net_tolerance: f64,
    pub seed: u64,
    /// Perturbs the analytic gradients; a negative control for the checker.
    pub corrupt: bool,
}

impl GradcheckSpec {
    pub fn new(loss: LossSpec) -> Self {
        Self {
            loss,
            loss_trials: 100,
            net_trials: 20,
            weights_per_net: 20,
            tolerance: 1e-6,
            net_tolerance: 1e-4,
            seed: 0,
            corrupt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub loss: String,
    pub loss_trials: usize,
    pub loss_max_error: f64,
    pub net_trials: usize,
    pub net_max_error: f64,
    pub weights_checked: usize,
    /// Weights whose ±step probe crosses a ReLU kink, a clip boundary or
    /// the wrapper's branch point.
    pub weights_skipped: usize,
    pub passed: bool,
}

pub const GRADCHECK_HEADER: [&str; 8] = [
    "loss",
    "loss_trials",
    "loss_max_rel_err",
    "net_trials",
    "net_max_rel_err",
    "weights_checked",
    "weights_skipped",
    "passed",
];

/// One row per report.
pub fn write_gradcheck_csv<W: Write>(reports: &[GradcheckReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GRADCHECK_HEADER)?;
    for r in reports {
        w.write_record([
            r.loss.clone(),
            r.loss_trials.to_string(),
            fmt_num(r.loss_max_error),
            r.net_trials.to_string(),
            fmt_num(r.net_max_error),
            r.weights_checked.to_string(),
            r.weights_skipped.to_string(),
            r.passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn gradcheck(spec: &GradcheckSpec) -> Result<GradcheckReport> {
    let mut loss_max_error = 0.0f64;
    for trial in 0..spec.loss_trials {
        let mut rng = Stream::derived(spec.seed, &[1, trial as u64]);
        let (p, g) = sample_loss_input(&spec.loss, trial, &mut rng)?;
        let mut analytic = spec.loss.eval(&p, &g)?.grad;
        let numeric = finite_difference_grad(
            |p, g| spec.loss.eval(p, g).map(|e| e.value).unwrap_or(f64::NAN),
            &p,
            &g,
            LOSS_STEP,
        );
        let keep: Vec<usize> = (0..p.len())
            .filter(|&i| {
                let v = p.values()[i];
                v > BOUNDARY_MARGIN && v < 1.0 - BOUNDARY_MARGIN
            })
            .collect();
        if spec.corrupt {
            corrupt(&mut analytic, &keep);
        }
        let err = max_relative_error(&pick(&analytic, &keep), &pick(&numeric, &keep));
        loss_max_error = loss_max_error.max(err);
    }

    let mut net_max_error = 0.0f64;
    let (mut checked, mut skipped) = (0, 0);
    for trial in 0..spec.net_trials {
        let mut rng = Stream::derived(spec.seed, &[2, trial as u64]);
        let probe = NetProbe::new(&spec.loss, trial, &mut rng)?;
        let base_regime = probe.regime(&probe.net)?;
        let acts = probe.net.forward_trace(&probe.image);
        let upstream = spec.loss.eval(&acts.output, &probe.mask)?.grad;
        let analytic = probe.net.backward(&probe.image, &acts, &upstream)?;

        let mut indices: Vec<usize> = (0..TinyNet::PARAM_COUNT).collect();
        rng.shuffle(&mut indices);
        let mut a = Vec::new();
        let mut n = Vec::new();
        for &i in indices.iter().take(spec.weights_per_net) {
            let mut plus = probe.net.clone();
            plus.params_mut()[i] += WEIGHT_STEP;
            let mut minus = probe.net.clone();
            minus.params_mut()[i] -= WEIGHT_STEP;
            if probe.regime(&plus)? != base_regime || probe.regime(&minus)? != base_regime {
                skipped += 1;
                continue;
            }
            checked += 1;
            let numeric = (probe.value(&plus)? - probe.value(&minus)?) / (2.0 * WEIGHT_STEP);
            a.push(analytic[i]);
            n.push(numeric);
        }
        if spec.corrupt {
            let all: Vec<usize> = (0..a.len()).collect();
            corrupt(&mut a, &all);
        }
        net_max_error = net_max_error.max(max_relative_error(&a, &n));
    }

    Ok(GradcheckReport {
        loss: spec.loss.label(),
        loss_trials: spec.loss_trials,
        loss_max_error,
        net_trials: spec.net_trials,
        net_max_error,
        weights_checked: checked,
        weights_skipped: skipped,
        passed: loss_max_error < spec.tolerance && net_max_error < spec.net_tolerance,
    })
}

fn pick(values: &[f64], keep: &[usize]) -> Vec<f64> {
    keep.iter().map(|&i| values[i]).collect()
}

fn corrupt(grad: &mut [f64], keep: &[usize]) {
    if let Some(&i) = keep.first() {
        let scale = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        grad[i] += 0.5 * scale + 1e-3;
    }
}

/// Base loss value must be usable by the wrapper and clear of its branch point.
fn acceptable_base(loss: &LossSpec, p: &ProbMap, g: &BinMask) -> Result<bool> {
    let Some(params) = loss.wrap else {
        return Ok(true);
    };
    let v = loss.base.eval(p, g, loss.smooth)?.value;
    Ok((0.0..=1.0).contains(&v) && (v - params.gamma()).abs() > BRANCH_MARGIN)
}

/// Even trials draw uniform probabilities; odd trials draw near-correct
/// predictions so that wrapped losses exercise the logarithmic branch.
fn sample_loss_input(
    loss: &LossSpec,
    trial: usize,
    rng: &mut Stream,
) -> Result<(ProbMap, BinMask)> {
    for _ in 0..MAX_RESAMPLES {
        let n = 4 + rng.below(253) as usize;
        let mut labels: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
        labels[rng.below(n as u64) as usize] = 1;
        let probs: Vec<f64> = labels
            .iter()
            .map(|&l| {
                if trial.is_multiple_of(2) {
                    rng.uniform()
                } else {
                    let miss = rng.uniform_in(2.0 * BOUNDARY_MARGIN, 0.04);
                    if l == 1 {
                        1.0 - miss
                    } else {
                        miss
                    }
                }
            })
            .collect();
        let p = ProbMap::from_row(probs)?;
        let g = BinMask::from_row(labels)?;
        if acceptable_base(loss, &p, &g)? {
            return Ok((p, g));
        }
    }
    Err(Error::Contract(format!(
        "no usable gradient-check input for {} after {MAX_RESAMPLES} draws",
        loss.label()
    )))
}

/// What must not change between a weight probe and its ±step neighbours.
#[derive(Debug, PartialEq)]
struct Regime {
    relu_active: Vec<bool>,
    clipped: Vec<bool>,
    below_gamma: Option<bool>,
}

struct NetProbe<'a> {
    loss: &'a LossSpec,
    net: TinyNet,
    image: ProbMap,
    mask: BinMask,
}

impl<'a> NetProbe<'a> {
    /// Odd trials sharpen the output layer and label the network's own
    /// thresholded prediction as truth, which drives base losses small.
    fn new(loss: &'a LossSpec, trial: usize, rng: &mut Stream) -> Result<Self> {
        for attempt in 0..MAX_RESAMPLES {
            let mut net = TinyNet::init(rng.next_u64());
            let image = ProbMap::new(
                NET_SIDE,
                NET_SIDE,
                (0..NET_SIDE * NET_SIDE).map(|_| rng.uniform()).collect(),
            )?;
            let mut labels: Vec<u8> = (0..NET_SIDE * NET_SIDE)
                .map(|_| rng.below(2) as u8)
                .collect();
            if trial % 2 == 1 {
                for w in net.output_layer_mut() {
                    *w *= 8.0;
                }
                labels = net
                    .forward(&image)
                    .values()
                    .iter()
                    .map(|&p| (p >= 0.5) as u8)
                    .collect();
            }
            if !labels.contains(&1) {
                let len = labels.len();
                labels[attempt % len] = 1;
            }
            let mask = BinMask::new(NET_SIDE, NET_SIDE, labels)?;
            let probe = NetProbe {
                loss,
                net,
                image,
                mask,
            };
            let out = probe.net.forward(&probe.image);
            if acceptable_base(loss, &out, &probe.mask)? {
                return Ok(probe);
            }
        }
        Err(Error::Contract(format!(
            "no usable network probe for {} after {MAX_RESAMPLES} draws",
            loss.label()
        )))
    }

    fn value(&self, net: &TinyNet) -> Result<f64> {
        Ok(self.loss.eval(&net.forward(&self.image), &self.mask)?.value)
    }

    fn regime(&self, net: &TinyNet) -> Result<Regime> {
        let acts = net.forward_trace(&self.image);
        let below_gamma = match self.loss.wrap {
            Some(params) => {
                let v = self
                    .loss
                    .base
                    .eval(&acts.output, &self.mask, self.loss.smooth)?
                    .value;
                if (v - params.gamma()).abs() <= BRANCH_MARGIN {
                    // treat a probe this close to the join as a regime change
                    return Ok(Regime {
                        relu_active: Vec::new(),
                        clipped: Vec::new(),
                        below_gamma: None,
                    });
                }
                Some(v < params.gamma())
            }
            None => None,
        };
        Ok(Regime {
            relu_active: acts.hidden_pre().iter().map(|&z| z > 0.0).collect(),
            clipped: acts
                .output
                .values()
                .iter()
                .map(|&p| !(PROB_CLIP..=1.0 - PROB_CLIP).contains(&p))
                .collect(),
            below_gamma,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::BaseLoss;

    fn quick(loss: &str) -> GradcheckSpec {
        GradcheckSpec {
            loss_trials: 10,
            net_trials: 4,
            ..GradcheckSpec::new(loss.parse().unwrap())
        }
    }

    #[test]
    fn every_selector_passes() {
        for name in BaseLoss::NAMES {
            for label in [name.to_string(), format!("all-{name}")] {
                let rep = gradcheck(&quick(&label)).unwrap();
                assert!(rep.passed, "{rep:?}");
                assert!(rep.weights_checked > 0);
            }
        }
    }

    #[test]
    fn corrupted_gradient_fails() {
        let rep = gradcheck(&GradcheckSpec {
            corrupt: true,
            ..quick("dice")
        })
        .unwrap();
        assert!(!rep.passed);
        assert!(rep.loss_max_error > 0.1);
    }

    #[test]
    fn zero_tolerance_fails() {
        let rep = gradcheck(&GradcheckSpec {
            tolerance: 0.0,
            ..quick("all-dice")
        })
        .unwrap();
        assert!(!rep.passed);
    }
}

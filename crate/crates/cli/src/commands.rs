use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use alloss::harness::{
    self, CompareSpec, DataSource, GradcheckReport, GradcheckSpec, GridPreset, GridSpec, RocModel,
    RocSpec, TrainSettings,
};
use alloss::loss::{ComboParams, FocalParams, TverskyParams};
use alloss::report::fmt_num;
use alloss::{model, AllParams, BaseLoss, LossSpec, SynthSpec};

use clap::ValueEnum;

use crate::args::*;

/// How a subcommand ended when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    CheckFailed,
}

pub fn run(cmd: Command) -> alloss::Result<Outcome> {
    match cmd {
        Command::Curve(a) => curve(a),
        Command::Grid(a) => grid(a),
        Command::Compare(a) => compare(a),
        Command::Roc(a) => roc(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Gendata(a) => gendata(a),
        Command::Train(a) => train(a),
    }
}

/// Runs `f` against the output file, or stdout when none was given.
fn with_output(
    out: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> alloss::Result<()>,
) -> alloss::Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Summary lines go to stdout unless stdout already carries the CSV.
fn summary(common: &Common, lines: &[String]) {
    for line in lines {
        if common.out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
}

fn all_params(w: &WrapArgs) -> alloss::Result<AllParams> {
    AllParams::new(w.gamma, w.omega, w.epsilon)
}

fn base_loss(name: LossName, b: &BaseLossArgs) -> alloss::Result<BaseLoss> {
    let tversky = || TverskyParams::new(b.tversky_alpha, b.tversky_beta);
    Ok(match name {
        LossName::Jaccard => BaseLoss::Jaccard,
        LossName::Dice => BaseLoss::Dice,
        LossName::Tversky => BaseLoss::Tversky(tversky()?),
        LossName::Focal => BaseLoss::Focal(FocalParams::new(b.focal_alpha, b.focal_gamma)?),
        LossName::Combo => BaseLoss::Combo(ComboParams::new(b.combo_mix)?),
        LossName::FocalTversky => {
            if !(b.ft_gamma.is_finite() && b.ft_gamma > 0.0) {
                return Err(alloss::Error::invalid("ft-gamma", "must be positive"));
            }
            BaseLoss::FocalTversky {
                tversky: tversky()?,
                ft_gamma: b.ft_gamma,
            }
        }
    })
}

fn smooth(b: &BaseLossArgs) -> alloss::Result<f64> {
    if b.smooth.is_finite() && b.smooth >= 0.0 {
        Ok(b.smooth)
    } else {
        Err(alloss::Error::invalid("smooth", "must be non-negative"))
    }
}

fn loss_spec(a: &LossArgs) -> alloss::Result<LossSpec> {
    let base = base_loss(a.loss, &a.base)?;
    let mut spec = if a.all_wrap {
        LossSpec::wrapped(base, all_params(&a.wrap)?)
    } else {
        LossSpec::plain(base)
    };
    spec.smooth = smooth(&a.base)?;
    Ok(spec)
}

fn synth_spec(d: &DataArgs) -> alloss::Result<SynthSpec> {
    let spec = SynthSpec {
        width: d.width,
        height: d.height,
        fg_fraction_target: d.fg_fraction,
        n_images: d.n_images,
        noise_sigma: d.noise,
        blob_count_range: (d.blobs_min, d.blobs_max),
        seed: d.data_seed,
    };
    spec.validate()?;
    Ok(spec)
}

fn data_source(d: &DataArgs) -> alloss::Result<DataSource> {
    match &d.manifest {
        Some(path) => Ok(DataSource::Manifest(path.clone())),
        None => Ok(DataSource::Synthetic(synth_spec(d)?)),
    }
}

fn settings(o: &OptimArgs) -> TrainSettings {
    TrainSettings {
        lr: o.lr,
        batch_size: o.batch_size,
        epochs: o.epochs,
    }
}

fn curve(a: CurveArgs) -> alloss::Result<Outcome> {
    let report = harness::curve(all_params(&a.wrap)?, a.points)?;
    with_output(a.common.out.as_deref(), |w| report.write_csv(w))?;
    let p = report.params;
    summary(
        &a.common,
        &[
            format!("C = {}", fmt_num(p.c())),
            format!(
                "derivative jump at gamma: {}",
                fmt_num(report.derivative_jump)
            ),
            format!("value gap at gamma: {}", fmt_num(report.join_gap)),
        ],
    );
    Ok(Outcome::Ok)
}

fn grid(a: GridArgs) -> alloss::Result<Outcome> {
    let preset = match a.preset {
        Preset::OmegaEpsilon => GridPreset::OmegaEpsilon,
        Preset::Gamma => GridPreset::Gamma,
    };
    let mut spec = GridSpec::new(data_source(&a.data)?, settings(&a.optim)).with_preset(preset);
    if let Some(g) = a.gammas {
        spec.gammas = g.0;
    }
    if let Some(o) = a.omegas {
        spec.omegas = o.0;
    }
    if let Some(e) = a.epsilons {
        spec.epsilons = e.0;
    }
    spec.seeds = a.seeds;
    spec.base_seed = a.common.seed;
    spec.base_loss = base_loss(a.loss, &a.base)?;
    spec.smooth = smooth(&a.base)?;
    spec.split_ratio = a.data.split;
    let report = harness::run_grid(&spec, a.common.jobs)?;
    with_output(a.common.out.as_deref(), |w| report.write_csv(w))?;
    let diverged = report
        .runs
        .iter()
        .filter(|r| r.status != harness::RunStatus::Ok)
        .count();
    summary(
        &a.common,
        &[format!(
            "{} cells, {} runs, {} diverged",
            report.means.len(),
            report.runs.len(),
            diverged
        )],
    );
    Ok(Outcome::Ok)
}

fn compare(a: CompareArgs) -> alloss::Result<Outcome> {
    let losses = a
        .losses
        .split(',')
        .map(|s| s.trim().parse::<LossSpec>())
        .collect::<alloss::Result<Vec<_>>>()?;
    let spec = CompareSpec {
        losses,
        seeds: a.seeds,
        base_seed: a.common.seed,
        data: data_source(&a.data)?,
        split_ratio: a.data.split,
        train: settings(&a.optim),
    };
    let report = harness::run_compare(&spec, a.common.jobs)?;
    with_output(a.common.out.as_deref(), |w| report.write_csv(w))?;
    if let Some(trace) = &a.trace {
        with_output(Some(trace), |w| report.write_trace_csv(w))?;
    }
    let lines: Vec<String> = report
        .means
        .iter()
        .map(|m| {
            format!(
                "{}: jaccard {} dice {} auc {}",
                m.loss,
                fmt_num(m.jaccard),
                fmt_num(m.dice),
                fmt_num(m.auc)
            )
        })
        .collect();
    summary(&a.common, &lines);
    Ok(Outcome::Ok)
}

fn roc(a: RocArgs) -> alloss::Result<Outcome> {
    let model = if a.untrained {
        RocModel::Untrained
    } else {
        RocModel::Trained {
            loss: loss_spec(&a.loss)?,
            train: settings(&a.optim),
        }
    };
    let spec = RocSpec {
        model,
        data: data_source(&a.data)?,
        split_ratio: a.data.split,
        seed: a.common.seed,
        n_thresholds: a.thresholds,
    };
    let report = harness::run_roc(&spec)?;
    with_output(a.common.out.as_deref(), |w| report.write_csv(w))?;
    summary(
        &a.common,
        &[
            format!("auc (trapezoidal): {}", fmt_num(report.curve.auc)),
            format!("auc (pair counting): {}", fmt_num(report.pair_auc)),
        ],
    );
    Ok(Outcome::Ok)
}

fn report_line(r: &GradcheckReport) -> String {
    format!(
        "{:<20} loss max rel err {:<12} net max rel err {:<12} weights {}/{} {}",
        r.loss,
        fmt_num(r.loss_max_error),
        fmt_num(r.net_max_error),
        r.weights_checked,
        r.weights_checked + r.weights_skipped,
        if r.passed { "PASS" } else { "FAIL" }
    )
}

fn gradcheck(a: GradcheckArgs) -> alloss::Result<Outcome> {
    let losses = if a.every_loss {
        let params = all_params(&a.loss.wrap)?;
        let smooth = smooth(&a.loss.base)?;
        let mut v = Vec::new();
        for name in LossName::value_variants() {
            let base = base_loss(*name, &a.loss.base)?;
            for spec in [LossSpec::plain(base), LossSpec::wrapped(base, params)] {
                v.push(LossSpec { smooth, ..spec });
            }
        }
        v
    } else {
        vec![loss_spec(&a.loss)?]
    };
    let mut reports = Vec::new();
    for loss in losses {
        let spec = GradcheckSpec {
            loss_trials: a.trials,
            net_trials: a.net_trials,
            tolerance: a.tolerance,
            net_tolerance: a.net_tolerance,
            seed: a.common.seed,
            corrupt: a.corrupt,
            ..GradcheckSpec::new(loss)
        };
        let r = harness::gradcheck(&spec)?;
        println!("{}", report_line(&r));
        reports.push(r);
    }
    if let Some(path) = &a.common.out {
        with_output(Some(path), |w| harness::write_gradcheck_csv(&reports, w))?;
    }
    Ok(if reports.iter().all(|r| r.passed) {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}

fn gendata(a: GendataArgs) -> alloss::Result<Outcome> {
    let Some(dir) = &a.common.out else {
        return Err(alloss::Error::invalid(
            "out",
            "gendata needs an output directory",
        ));
    };
    let entries = harness::gendata(&synth_spec(&a.data)?, dir)?;
    println!("wrote {} samples to {}", entries.len(), dir.display());
    Ok(Outcome::Ok)
}

fn train(a: TrainArgs) -> alloss::Result<Outcome> {
    let loss = loss_spec(&a.loss)?;
    let data = data_source(&a.data)?;
    let (train_set, val_set) = data.load_split(a.data.split, a.common.seed)?;
    let config = settings(&a.optim).config(loss, a.common.seed);
    let record = model::train(&config, &train_set, &val_set)?;
    with_output(a.common.out.as_deref(), |w| record.write_csv(w))?;
    let last = record.last();
    summary(
        &a.common,
        &[format!(
            "epoch {}: val jaccard {} dice {}",
            last.epoch,
            fmt_num(last.val_jaccard),
            fmt_num(last.val_dice)
        )],
    );
    Ok(Outcome::Ok)
}

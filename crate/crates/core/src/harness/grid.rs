use std::io::Write;

use crate::error::{Error, Result};
use crate::loss::{AllParams, BaseLoss, LossSpec, DEFAULT_SMOOTH};
use crate::model;
use crate::report::fmt_num;

use super::{mean, par_map, run_seed, DataSource, TrainSettings};

/// Hyperparameter sweeps over the adaptive wrapper.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub gammas: Vec<f64>,
    pub omegas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub seeds: usize,
    pub base_seed: u64,
    pub base_loss: BaseLoss,
    pub smooth: f64,
    pub data: DataSource,
    pub split_ratio: f64,
    pub train: TrainSettings,
}

/// Preset sweeps: ω × ε at γ = 0.1, then γ at ω = 10, ε = 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridPreset {
    OmegaEpsilon,
    Gamma,
}

impl GridPreset {
    /// `(gammas, omegas, epsilons)`.
    pub fn axes(self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        match self {
            GridPreset::OmegaEpsilon => (
                vec![0.1],
                vec![6.0, 8.0, 10.0, 12.0, 14.0, 16.0],
                vec![0.3, 0.5, 1.0, 2.0],
            ),
            GridPreset::Gamma => (
                vec![0.08, 0.10, 0.12, 0.15, 0.20, 0.30],
                vec![10.0],
                vec![0.5],
            ),
        }
    }
}

impl GridSpec {
    pub fn new(data: DataSource, train: TrainSettings) -> Self {
        let (gammas, omegas, epsilons) = GridPreset::OmegaEpsilon.axes();
        Self {
            gammas,
            omegas,
            epsilons,
            seeds: 3,
            base_seed: 0,
            base_loss: BaseLoss::Dice,
            smooth: DEFAULT_SMOOTH,
            data,
            split_ratio: 0.8,
            train,
        }
    }

    pub fn with_preset(mut self, preset: GridPreset) -> Self {
        (self.gammas, self.omegas, self.epsilons) = preset.axes();
        self
    }

    /// Cells in γ-major, then ω, then ε order.
    pub fn cells(&self) -> Result<Vec<AllParams>> {
        let mut cells = Vec::new();
        for &g in &self.gammas {
            for &o in &self.omegas {
                for &e in &self.epsilons {
                    cells.push(AllParams::new(g, o, e)?);
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::invalid(
                "grid",
                "every swept list needs at least one value",
            ));
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Diverged,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRun {
    pub cell: usize,
    pub params: AllParams,
    pub seed_index: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub val_jaccard: f64,
    pub val_dice: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCellMean {
    pub cell: usize,
    pub params: AllParams,
    /// Runs that finished without diverging.
    pub runs_ok: usize,
    pub runs: usize,
    pub val_jaccard: f64,
    pub val_dice: f64,
    pub epochs_run: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub runs: Vec<GridRun>,
    pub means: Vec<GridCellMean>,
}

pub const GRID_HEADER: [&str; 10] = [
    "row_type",
    "cell",
    "gamma",
    "omega",
    "epsilon",
    "seed",
    "val_jaccard",
    "val_dice",
    "epochs_run",
    "status",
];

pub fn run_grid(spec: &GridSpec, jobs: usize) -> Result<GridReport> {
    if spec.seeds == 0 {
        return Err(Error::invalid("seeds", "need at least one seed per cell"));
    }
    let cells = spec.cells()?;
    let (train_set, val_set) = spec.data.load_split(spec.split_ratio, spec.base_seed)?;
    let tasks: Vec<(usize, AllParams, usize)> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, &p)| (0..spec.seeds).map(move |s| (c, p, s)))
        .collect();
    let runs = par_map(jobs, tasks, |(cell, params, seed_index)| {
        let seed = run_seed(spec.base_seed, seed_index);
        let loss = LossSpec {
            base: spec.base_loss,
            smooth: spec.smooth,
            wrap: Some(params),
        };
        let cfg = spec.train.config(loss, seed);
        let run = |status, val_jaccard, val_dice, epochs_run| GridRun {
            cell,
            params,
            seed_index,
            seed,
            status,
            val_jaccard,
            val_dice,
            epochs_run,
        };
        match model::train(&cfg, &train_set, &val_set) {
            Ok(rec) => {
                let last = rec.last();
                Ok(run(
                    RunStatus::Ok,
                    last.val_jaccard,
                    last.val_dice,
                    rec.rows.len(),
                ))
            }
            Err(Error::Diverged { epoch, .. }) => {
                Ok(run(RunStatus::Diverged, f64::NAN, f64::NAN, epoch))
            }
            Err(e) => Err(e),
        }
    })?;

    let means = cells
        .iter()
        .enumerate()
        .map(|(cell, &params)| {
            let mine: Vec<&GridRun> = runs.iter().filter(|r| r.cell == cell).collect();
            let ok: Vec<&&GridRun> = mine.iter().filter(|r| r.status == RunStatus::Ok).collect();
            GridCellMean {
                cell,
                params,
                runs_ok: ok.len(),
                runs: mine.len(),
                val_jaccard: mean(ok.iter().map(|r| r.val_jaccard)),
                val_dice: mean(ok.iter().map(|r| r.val_dice)),
                epochs_run: mean(mine.iter().map(|r| r.epochs_run as f64)),
            }
        })
        .collect();
    Ok(GridReport { runs, means })
}

impl GridReport {
    /// Run rows first, then one mean row per cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(GRID_HEADER)?;
        for r in &self.runs {
            w.write_record([
                "run".to_string(),
                r.cell.to_string(),
                fmt_num(r.params.gamma()),
                fmt_num(r.params.omega()),
                fmt_num(r.params.epsilon()),
                r.seed.to_string(),
                fmt_num(r.val_jaccard),
                fmt_num(r.val_dice),
                r.epochs_run.to_string(),
                r.status.as_str().to_string(),
            ])?;
        }
        for m in &self.means {
            let status = match m.runs_ok {
                0 => "diverged".to_string(),
                n if n == m.runs => "ok".to_string(),
                n => format!("partial {n}/{}", m.runs),
            };
            w.write_record([
                "mean".to_string(),
                m.cell.to_string(),
                fmt_num(m.params.gamma()),
                fmt_num(m.params.omega()),
                fmt_num(m.params.epsilon()),
                String::new(),
                fmt_num(m.val_jaccard),
                fmt_num(m.val_dice),
                fmt_num(m.epochs_run),
                status,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

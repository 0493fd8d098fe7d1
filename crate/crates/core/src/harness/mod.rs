//! Experiment drivers: each produces an in-memory report that can be
//! written as CSV. The `alloss` binary is a thin layer over these.
//!
//! Every run seed is derived from `(base seed, seed index)` only, so all
//! cells of a grid and all losses of a comparison see the same
//! initializations and batch orders for a given seed index, and the
//! number of worker threads never changes a result.

mod compare;
mod curve;
mod data;
mod gendata;
mod gradcheck;
mod grid;
mod roc;

pub use compare::{
    epochs_to_fraction, run_compare, CompareReport, CompareRun, CompareSpec, LossMean,
};
pub use curve::{curve, CurveReport, CurveRow};
pub use data::{DataSource, TrainSettings};
pub use gendata::gendata;
pub use gradcheck::{
    gradcheck, write_gradcheck_csv, GradcheckReport, GradcheckSpec, GRADCHECK_HEADER,
};
pub use grid::{run_grid, GridCellMean, GridPreset, GridReport, GridRun, GridSpec, RunStatus};
pub use roc::{run_roc, RocModel, RocReport, RocSpec};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::synth::rng::derive_seed;

/// Seed of the `index`-th repeated run under `base`.
pub fn run_seed(base: u64, index: usize) -> u64 {
    derive_seed(base, &[index as u64])
}

/// Maps `f` over `items` on at most `jobs` threads, preserving order.
pub(crate) fn par_map<T, R, F>(jobs: usize, items: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync + Send,
{
    if jobs == 0 {
        return Err(Error::invalid("jobs", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
    pool.install(|| items.into_par_iter().map(f).collect())
}

pub(crate) fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

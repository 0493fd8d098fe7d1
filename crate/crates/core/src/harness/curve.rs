use std::io::Write;

use crate::error::{Error, Result};
use crate::loss::AllParams;
use crate::report::fmt_num;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub x: f64,
    pub forward: f64,
    pub derivative: f64,
}

/// The wrapper and its slope sampled over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveReport {
    pub params: AllParams,
    pub rows: Vec<CurveRow>,
    /// `ω/(ε+γ) - 1`, the slope discontinuity at the join.
    pub derivative_jump: f64,
    /// `|log branch(γ) - linear branch(γ)|`.
    pub join_gap: f64,
}

pub const CURVE_HEADER: [&str; 3] = ["x", "all_forward", "all_derivative"];

/// `n_points` evenly spaced base-loss values in `[0, 1]`, plus `γ` itself
/// when it is not already on the grid.
pub fn curve(params: AllParams, n_points: usize) -> Result<CurveReport> {
    if n_points < 2 {
        return Err(Error::invalid(
            "points",
            format!("need at least 2, got {n_points}"),
        ));
    }
    let mut xs: Vec<f64> = (0..n_points)
        .map(|i| i as f64 / (n_points - 1) as f64)
        .collect();
    if !xs.contains(&params.gamma()) {
        xs.push(params.gamma());
        xs.sort_by(f64::total_cmp);
    }
    let rows = xs
        .into_iter()
        .map(|x| {
            Ok(CurveRow {
                x,
                forward: params.forward(x)?,
                derivative: params.derivative(x)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CurveReport {
        params,
        rows,
        derivative_jump: params.derivative_jump(),
        join_gap: (params.log_branch(params.gamma()) - params.linear_branch(params.gamma())).abs(),
    })
}

impl CurveReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CURVE_HEADER)?;
        for r in &self.rows {
            w.write_record([fmt_num(r.x), fmt_num(r.forward), fmt_num(r.derivative)])?;
        }
        w.flush()?;
        Ok(())
    }
}

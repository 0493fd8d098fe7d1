//! Finite differences over predicted probabilities.

use crate::mask::{BinMask, ProbMap};

/// Numerical estimate of `∂loss/∂p_i` for every pixel.
///
/// Uses the five-point central stencil where `p_i ± 2·step` stays inside
/// `[0, 1]`, the three-point one where only `p_i ± step` does, and a
/// one-sided difference otherwise.
pub fn finite_difference_grad<F>(loss_fn: F, p: &ProbMap, g: &BinMask, step: f64) -> Vec<f64>
where
    F: Fn(&ProbMap, &BinMask) -> f64,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut probe = p.clone();
    (0..p.len())
        .map(|i| {
            let x = p.values()[i];
            let mut at = |v: f64| {
                probe.values_mut()[i] = v;
                loss_fn(&probe, g)
            };
            let d = if x - 2.0 * step >= 0.0 && x + 2.0 * step <= 1.0 {
                let near = at(x + step) - at(x - step);
                let far = at(x + 2.0 * step) - at(x - 2.0 * step);
                (8.0 * near - far) / (12.0 * step)
            } else {
                let (lo, hi) = ((x - step).max(0.0), (x + step).min(1.0));
                (at(hi) - at(lo)) / (hi - lo)
            };
            probe.values_mut()[i] = x;
            d
        })
        .collect()
}

/// Largest entrywise deviation, relative to the larger infinity norm of the
/// two gradients. Two all-zero vectors have error 0.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let abs_max = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    if abs_max == 0.0 {
        0.0
    } else if scale == 0.0 || !abs_max.is_finite() {
        f64::INFINITY
    } else {
        abs_max / scale
    }
}

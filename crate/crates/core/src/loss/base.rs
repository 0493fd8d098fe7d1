use crate::error::{Error, Result};
use crate::mask::{ensure_same_dims, BinMask, ProbMap};

use super::{accurate_sum, LossEval};

/// Added to numerator and denominator of the overlap losses.
pub const DEFAULT_SMOOTH: f64 = 1e-6;

/// Probabilities entering a logarithm are clamped to `[PROB_CLIP, 1 - PROB_CLIP]`.
pub const PROB_CLIP: f64 = 1e-7;

/// Tversky weights. `alpha` multiplies false negatives, `beta` false positives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TverskyParams {
    pub alpha: f64,
    pub beta: f64,
}

impl TverskyParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0 && alpha + beta > 0.0) || !(alpha + beta).is_finite() {
            return Err(Error::invalid(
                "tversky",
                format!("need alpha, beta >= 0 with a positive sum, got ({alpha}, {beta})"),
            ));
        }
        Ok(Self { alpha, beta })
    }
}

impl Default for TverskyParams {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            beta: 0.3,
        }
    }
}

/// Focal loss settings.
///
/// Foreground pixels are weighted by `alpha_balance`, background pixels by 1,
/// so `alpha_balance = 1` with `gamma_focus = 0` is plain cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalParams {
    pub alpha_balance: f64,
    pub gamma_focus: f64,
}

impl FocalParams {
    pub fn new(alpha_balance: f64, gamma_focus: f64) -> Result<Self> {
        if !(alpha_balance > 0.0 && alpha_balance <= 1.0) {
            return Err(Error::invalid(
                "alpha_balance",
                format!("must lie in (0, 1], got {alpha_balance}"),
            ));
        }
        if !(gamma_focus >= 0.0 && gamma_focus.is_finite()) {
            return Err(Error::invalid(
                "gamma_focus",
                format!("must be finite and >= 0, got {gamma_focus}"),
            ));
        }
        Ok(Self {
            alpha_balance,
            gamma_focus,
        })
    }
}

impl Default for FocalParams {
    fn default() -> Self {
        Self {
            alpha_balance: 1.0,
            gamma_focus: 2.0,
        }
    }
}

/// Weight of the cross-entropy term in the combo loss; the Dice term gets `1 - mix`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComboParams {
    pub mix: f64,
}

impl ComboParams {
    pub fn new(mix: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mix) {
            return Err(Error::invalid(
                "mix",
                format!("must lie in [0, 1], got {mix}"),
            ));
        }
        Ok(Self { mix })
    }
}

impl Default for ComboParams {
    fn default() -> Self {
        Self { mix: 0.5 }
    }
}

fn check_smooth(smooth: f64) -> Result<()> {
    if !(smooth >= 0.0 && smooth.is_finite()) {
        return Err(Error::invalid(
            "smooth",
            format!("must be finite and >= 0, got {smooth}"),
        ));
    }
    Ok(())
}

struct Overlap {
    /// Σ g·p, the soft intersection.
    inter: f64,
    sum_g: f64,
    sum_p: f64,
}

fn overlap(p: &ProbMap, g: &BinMask, smooth: f64, name: &'static str) -> Result<Overlap> {
    ensure_same_dims(p, g)?;
    check_smooth(smooth)?;
    let gv = g.values();
    let pv = p.values();
    let sum_g = g.foreground_count() as f64;
    if sum_g == 0.0 && smooth == 0.0 {
        return Err(Error::DegenerateDenominator(name));
    }
    Ok(Overlap {
        inter: accurate_sum(
            pv.iter()
                .zip(gv)
                .map(|(&p, &g)| if g == 1 { p } else { 0.0 }),
        ),
        sum_g,
        sum_p: accurate_sum(pv.iter().copied()),
    })
}

/// `1 - (2 Σ g p + s) / (Σ g + Σ p + s)`.
pub fn soft_dice_loss(p: &ProbMap, g: &BinMask, smooth: f64) -> Result<LossEval> {
    let o = overlap(p, g, smooth, "soft dice loss")?;
    let num = 2.0 * o.inter + smooth;
    let den = o.sum_g + o.sum_p + smooth;
    if den == 0.0 {
        return Err(Error::DegenerateDenominator("soft dice loss"));
    }
    let den2 = den * den;
    let grad = g
        .values()
        .iter()
        .map(|&gi| -(2.0 * gi as f64 * den - num) / den2)
        .collect();
    Ok(LossEval {
        value: 1.0 - num / den,
        grad,
    })
}

/// `1 - (Σ g p + s) / (Σ g + Σ p - Σ g p + s)`.
pub fn soft_jaccard_loss(p: &ProbMap, g: &BinMask, smooth: f64) -> Result<LossEval> {
    let o = overlap(p, g, smooth, "soft jaccard loss")?;
    let num = o.inter + smooth;
    let den = o.sum_g + o.sum_p - o.inter + smooth;
    if den == 0.0 {
        return Err(Error::DegenerateDenominator("soft jaccard loss"));
    }
    let den2 = den * den;
    // d(union)/dp_i = 1 - g_i
    let grad = g
        .values()
        .iter()
        .map(|&gi| {
            let gi = gi as f64;
            -(gi * den - num * (1.0 - gi)) / den2
        })
        .collect();
    Ok(LossEval {
        value: 1.0 - num / den,
        grad,
    })
}

/// Tversky index `(TP + s) / (TP + α FN + β FP + s)` on soft counts, plus its
/// per-pixel derivative.
fn tversky_index(
    p: &ProbMap,
    g: &BinMask,
    tp: TverskyParams,
    smooth: f64,
) -> Result<(f64, Vec<f64>)> {
    let o = overlap(p, g, smooth, "tversky loss")?;
    let fneg = o.sum_g - o.inter;
    let fpos = o.sum_p - o.inter;
    let num = o.inter + smooth;
    let den = o.inter + tp.alpha * fneg + tp.beta * fpos + smooth;
    if den == 0.0 {
        return Err(Error::DegenerateDenominator("tversky loss"));
    }
    let den2 = den * den;
    let grad = g
        .values()
        .iter()
        .map(|&gi| {
            let gi = gi as f64;
            let d_den = gi - tp.alpha * gi + tp.beta * (1.0 - gi);
            (gi * den - num * d_den) / den2
        })
        .collect();
    Ok((num / den, grad))
}

pub fn tversky_loss(p: &ProbMap, g: &BinMask, tp: TverskyParams, smooth: f64) -> Result<LossEval> {
    let (index, d_index) = tversky_index(p, g, tp, smooth)?;
    Ok(LossEval {
        value: 1.0 - index,
        grad: d_index.into_iter().map(|d| -d).collect(),
    })
}

/// `(1 - TI)^(1 / ft_gamma)`.
///
/// At a perfect match the gradient is taken to be zero; the exponent is below
/// one for `ft_gamma > 1`, so the one-sided derivative there is unbounded.
pub fn focal_tversky_loss(
    p: &ProbMap,
    g: &BinMask,
    tp: TverskyParams,
    ft_gamma: f64,
    smooth: f64,
) -> Result<LossEval> {
    if !(ft_gamma > 0.0 && ft_gamma.is_finite()) {
        return Err(Error::invalid(
            "ft_gamma",
            format!("must be positive, got {ft_gamma}"),
        ));
    }
    let (index, d_index) = tversky_index(p, g, tp, smooth)?;
    let exponent = 1.0 / ft_gamma;
    let base = (1.0 - index).max(0.0);
    let value = base.powf(exponent);
    let outer = if base > 0.0 {
        exponent * base.powf(exponent - 1.0)
    } else {
        0.0
    };
    Ok(LossEval {
        value,
        grad: d_index.into_iter().map(|d| -outer * d).collect(),
    })
}

fn clip_prob(p: f64) -> (f64, f64) {
    // (clamped value, d clamped / d p)
    if p < PROB_CLIP {
        (PROB_CLIP, 0.0)
    } else if p > 1.0 - PROB_CLIP {
        (1.0 - PROB_CLIP, 0.0)
    } else {
        (p, 1.0)
    }
}

/// Mean binary cross-entropy with clipped probabilities.
pub fn binary_cross_entropy(p: &ProbMap, g: &BinMask) -> Result<LossEval> {
    ensure_same_dims(p, g)?;
    let n = p.len() as f64;
    let mut grad = Vec::with_capacity(p.len());
    let value = accurate_sum(p.values().iter().zip(g.values()).map(|(&pi, &gi)| {
        let (q, dq) = clip_prob(pi);
        if gi == 1 {
            grad.push(-dq / (q * n));
            -q.ln()
        } else {
            grad.push(dq / ((1.0 - q) * n));
            -(1.0 - q).ln()
        }
    })) / n;
    Ok(LossEval { value, grad })
}

/// Mean of `-w (1 - p_t)^γ ln p_t` with `p_t = p` on foreground and `1 - p`
/// on background.
pub fn focal_loss(p: &ProbMap, g: &BinMask, fp: FocalParams) -> Result<LossEval> {
    ensure_same_dims(p, g)?;
    let n = p.len() as f64;
    let gamma = fp.gamma_focus;
    let mut grad = Vec::with_capacity(p.len());
    let value = accurate_sum(p.values().iter().zip(g.values()).map(|(&pi, &gi)| {
        let fg = gi == 1;
        let (weight, raw_pt, sign) = if fg {
            (fp.alpha_balance, pi, 1.0)
        } else {
            (1.0, 1.0 - pi, -1.0)
        };
        let (pt, dpt) = clip_prob(raw_pt);
        let miss = 1.0 - pt;
        let modulator = miss.powf(gamma);
        let log_pt = pt.ln();
        let d_modulator = if gamma == 0.0 {
            0.0
        } else {
            -gamma * miss.powf(gamma - 1.0)
        };
        // d/dpt of -(1-pt)^γ ln pt
        let d_term = -(d_modulator * log_pt + modulator / pt);
        grad.push(weight * d_term * dpt * sign / n);
        -weight * modulator * log_pt
    })) / n;
    Ok(LossEval { value, grad })
}

/// `mix · BCE + (1 - mix) · Dice loss`.
pub fn combo_loss(p: &ProbMap, g: &BinMask, cp: ComboParams, smooth: f64) -> Result<LossEval> {
    let bce = binary_cross_entropy(p, g)?;
    let dice = soft_dice_loss(p, g, smooth)?;
    let m = cp.mix;
    Ok(LossEval {
        value: m * bce.value + (1.0 - m) * dice.value,
        grad: bce
            .grad
            .iter()
            .zip(&dice.grad)
            .map(|(b, d)| m * b + (1.0 - m) * d)
            .collect(),
    })
}

//! Adaptive logarithmic loss (ALL).
//!
//! A base loss value `x ∈ [0, 1]` is mapped through
//!
//! ```text
//! ALL(x) = ω ln(1 + |x| / ε)   if |x| < γ
//!          |x| - C             otherwise,     C = γ - ω ln(1 + γ / ε)
//! ```
//!
//! `C` makes the two branches meet in value at `γ`. The slopes do not meet:
//! the log branch arrives with slope `ω / (ε + γ)` and the linear branch
//! leaves with slope 1, so the derivative jumps unless `ω = ε + γ`.
//! [`AllParams::derivative_jump`] reports the size of that jump.

use crate::error::{Error, Result};

use super::LossEval;

/// Base loss values may overshoot `[0, 1]` by this much from rounding.
const RANGE_SLACK: f64 = 1e-12;

/// Hyperparameters of the adaptive wrapper. The join constant is always
/// recomputed from the other three.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllParams {
    gamma: f64,
    omega: f64,
    epsilon: f64,
}

impl AllParams {
    pub fn new(gamma: f64, omega: f64, epsilon: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::invalid(
                "gamma",
                format!("must lie in (0, 1), got {gamma}"),
            ));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::invalid(
                "omega",
                format!("must be positive, got {omega}"),
            ));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(
                "epsilon",
                format!("must be positive, got {epsilon}"),
            ));
        }
        Ok(Self {
            gamma,
            omega,
            epsilon,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Join constant `γ - ω ln(1 + γ/ε)`.
    pub fn c(&self) -> f64 {
        self.gamma - self.omega * (self.gamma / self.epsilon).ln_1p()
    }

    /// Value of the logarithmic branch, evaluated regardless of `x`.
    pub fn log_branch(&self, x: f64) -> f64 {
        self.omega * (x.abs() / self.epsilon).ln_1p()
    }

    /// Value of the linear branch, evaluated regardless of `x`.
    pub fn linear_branch(&self, x: f64) -> f64 {
        x.abs() - self.c()
    }

    pub fn forward(&self, x: f64) -> Result<f64> {
        let x = check_base_value(x)?;
        Ok(if x < self.gamma {
            self.log_branch(x)
        } else {
            self.linear_branch(x)
        })
    }

    /// `d ALL / d x`. At `x = γ` the linear branch applies.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        let x = check_base_value(x)?;
        Ok(if x < self.gamma {
            self.omega / (self.epsilon + x)
        } else {
            1.0
        })
    }

    /// Left-limit minus right-limit of the derivative at `γ`: `ω/(ε+γ) - 1`.
    pub fn derivative_jump(&self) -> f64 {
        self.omega / (self.epsilon + self.gamma) - 1.0
    }

    /// Wraps a base loss: the value goes through [`Self::forward`] and every
    /// gradient entry is scaled by [`Self::derivative`] at the base value.
    pub fn wrap(&self, base: LossEval) -> Result<LossEval> {
        let value = self.forward(base.value)?;
        let slope = self.derivative(base.value)?;
        Ok(LossEval {
            value,
            grad: base.grad.into_iter().map(|g| slope * g).collect(),
        })
    }
}

impl Default for AllParams {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            omega: 10.0,
            epsilon: 0.5,
        }
    }
}

/// Returns `|x|` after checking `x` is a valid base loss value.
fn check_base_value(x: f64) -> Result<f64> {
    if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&x) {
        return Err(Error::Contract(format!(
            "base loss value {x} outside [0, 1]; the wrapped loss must be a normalized overlap loss"
        )));
    }
    Ok(x.abs())
}

pub fn all_constant(gamma: f64, omega: f64, epsilon: f64) -> Result<f64> {
    Ok(AllParams::new(gamma, omega, epsilon)?.c())
}

pub fn all_forward(base_loss_value: f64, params: &AllParams) -> Result<f64> {
    params.forward(base_loss_value)
}

pub fn all_derivative(base_loss_value: f64, params: &AllParams) -> Result<f64> {
    params.derivative(base_loss_value)
}

pub fn all_wrap(base: LossEval, params: &AllParams) -> Result<LossEval> {
    params.wrap(base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const REF_C: f64 = -1.723_215_567_939_545_8;

    #[test]
    fn join_constant_at_defaults() {
        let c = all_constant(0.1, 10.0, 0.5).unwrap();
        assert!((c - REF_C).abs() < 1e-12, "{c}");
        assert!((c - (0.1 - 10.0 * 1.2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn join_constant_rejects_bad_params() {
        assert!(all_constant(0.1, 0.0, 0.5).is_err());
        assert!(all_constant(0.1, 10.0, 0.0).is_err());
        assert!(all_constant(0.0, 10.0, 0.5).is_err());
        assert!(all_constant(1.0, 10.0, 0.5).is_err());
    }

    #[test]
    fn join_constant_vanishes_as_gamma_shrinks() {
        let c = all_constant(1e-12, 10.0, 0.5).unwrap();
        assert!(c.abs() < 1e-10);
    }

    #[test]
    fn forward_examples() {
        let p = AllParams::default();
        assert_eq!(p.forward(0.0).unwrap(), 0.0);
        assert!((p.forward(0.05).unwrap() - 0.953_101_798_043_249_3).abs() < 1e-12);
        assert!((p.forward(0.3).unwrap() - 2.023_215_567_939_545_6).abs() < 1e-12);
        assert!((p.forward(0.1).unwrap() - 1.823_215_567_939_545_9).abs() < 1e-12);
        assert!((p.log_branch(0.1) - p.linear_branch(0.1)).abs() < 1e-12);
    }

    #[test]
    fn forward_rejects_out_of_range() {
        let p = AllParams::default();
        assert!(p.forward(1.5).is_err());
        assert!(p.forward(-0.2).is_err());
        assert!(p.forward(f64::NAN).is_err());
    }

    #[test]
    fn derivative_examples() {
        let p = AllParams::default();
        assert_eq!(p.derivative(0.0).unwrap(), 20.0);
        assert!((p.derivative(0.05).unwrap() - 18.181_818_181_818_18).abs() < 1e-12);
        assert_eq!(p.derivative(0.3).unwrap(), 1.0);
        assert_eq!(p.derivative(0.1).unwrap(), 1.0);
        assert!((p.derivative_jump() - 15.666_666_666_666_668).abs() < 1e-12);
    }

    #[test]
    fn smooth_join_only_when_omega_matches() {
        let p = AllParams::new(0.1, 0.6, 0.5).unwrap();
        assert!(p.derivative_jump().abs() < 1e-15);
    }

    #[test]
    fn wrap_zero() {
        let w = AllParams::default()
            .wrap(LossEval {
                value: 0.0,
                grad: vec![0.0; 3],
            })
            .unwrap();
        assert_eq!(w.value, 0.0);
        assert_eq!(w.grad, vec![0.0; 3]);
    }

    proptest! {
        #[test]
        fn strictly_increasing(
            gamma in 0.01f64..0.99, omega in 0.1f64..50.0, epsilon in 0.05f64..5.0,
            a in 0.0f64..1.0, b in 0.0f64..1.0,
        ) {
            let p = AllParams::new(gamma, omega, epsilon).unwrap();
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(p.forward(lo).unwrap() < p.forward(hi).unwrap());
        }

        #[test]
        fn continuous_at_join(gamma in 0.01f64..0.99, omega in 0.1f64..50.0, epsilon in 0.05f64..5.0) {
            let p = AllParams::new(gamma, omega, epsilon).unwrap();
            let scale = 1.0 + p.c().abs();
            prop_assert!((p.log_branch(gamma) - p.linear_branch(gamma)).abs() < 1e-12 * scale);
        }

        #[test]
        fn small_errors_amplified(x in 0.0f64..0.1) {
            let p = AllParams::default();
            prop_assume!(x < p.gamma());
            prop_assert!(p.derivative(x).unwrap() > 1.0);
        }

        #[test]
        fn non_negative_and_zero_only_at_zero(x in 0.0f64..=1.0) {
            let v = AllParams::default().forward(x).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert_eq!(v == 0.0, x == 0.0);
        }
    }
}

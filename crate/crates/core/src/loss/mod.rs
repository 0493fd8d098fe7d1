//! Differentiable segmentation losses over probability maps.
//!
//! Every loss returns a [`LossEval`]: the scalar value together with the
//! analytic gradient with respect to each predicted probability. The
//! adaptive logarithmic wrapper in [`adaptive`] rescales any base loss that
//! lies in `[0, 1]`.

pub mod adaptive;
mod base;
pub mod gradcheck;
mod select;

pub use adaptive::{all_constant, all_derivative, all_forward, all_wrap, AllParams};
pub use base::{
    binary_cross_entropy, combo_loss, focal_loss, focal_tversky_loss, soft_dice_loss,
    soft_jaccard_loss, tversky_loss, ComboParams, FocalParams, TverskyParams, DEFAULT_SMOOTH,
    PROB_CLIP,
};
pub use gradcheck::{finite_difference_grad, max_relative_error};
pub use select::{BaseLoss, LossSpec};

/// A loss value and its gradient with respect to every predicted probability.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl LossEval {
    pub fn scaled(mut self, factor: f64) -> Self {
        self.value *= factor;
        self.grad.iter_mut().for_each(|g| *g *= factor);
        self
    }
}

/// Compensated (Neumaier) summation.
///
/// Finite-difference checks at step 1e-6 resolve differences far below the
/// rounding error of a naive sum over a few hundred pixels.
pub(crate) fn accurate_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

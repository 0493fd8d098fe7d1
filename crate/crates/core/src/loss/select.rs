use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mask::{BinMask, ProbMap};

use super::base::{self, ComboParams, FocalParams, TverskyParams, DEFAULT_SMOOTH};
use super::{AllParams, LossEval};

/// One of the six base segmentation losses with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseLoss {
    Jaccard,
    Dice,
    Tversky(TverskyParams),
    Focal(FocalParams),
    Combo(ComboParams),
    FocalTversky {
        tversky: TverskyParams,
        ft_gamma: f64,
    },
}

impl BaseLoss {
    pub const NAMES: [&'static str; 6] = [
        "jaccard",
        "dice",
        "tversky",
        "focal",
        "combo",
        "focal-tversky",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BaseLoss::Jaccard => "jaccard",
            BaseLoss::Dice => "dice",
            BaseLoss::Tversky(_) => "tversky",
            BaseLoss::Focal(_) => "focal",
            BaseLoss::Combo(_) => "combo",
            BaseLoss::FocalTversky { .. } => "focal-tversky",
        }
    }

    /// Every base loss with its default parameters.
    pub fn all_defaults() -> [BaseLoss; 6] {
        BaseLoss::NAMES.map(|n| n.parse().expect("known loss name"))
    }

    pub fn eval(&self, p: &ProbMap, g: &BinMask, smooth: f64) -> Result<LossEval> {
        match *self {
            BaseLoss::Jaccard => base::soft_jaccard_loss(p, g, smooth),
            BaseLoss::Dice => base::soft_dice_loss(p, g, smooth),
            BaseLoss::Tversky(tp) => base::tversky_loss(p, g, tp, smooth),
            BaseLoss::Focal(fp) => base::focal_loss(p, g, fp),
            BaseLoss::Combo(cp) => base::combo_loss(p, g, cp, smooth),
            BaseLoss::FocalTversky { tversky, ft_gamma } => {
                base::focal_tversky_loss(p, g, tversky, ft_gamma, smooth)
            }
        }
    }
}

impl FromStr for BaseLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "jaccard" => BaseLoss::Jaccard,
            "dice" => BaseLoss::Dice,
            "tversky" => BaseLoss::Tversky(TverskyParams::default()),
            "focal" => BaseLoss::Focal(FocalParams::default()),
            "combo" => BaseLoss::Combo(ComboParams::default()),
            "focal-tversky" => BaseLoss::FocalTversky {
                tversky: TverskyParams::default(),
                ft_gamma: 4.0 / 3.0,
            },
            other => {
                return Err(Error::invalid(
                    "loss",
                    format!(
                        "unknown loss `{other}`, expected one of {:?}",
                        BaseLoss::NAMES
                    ),
                ))
            }
        })
    }
}

/// A complete loss selection: a base loss, its smoothing constant and an
/// optional adaptive logarithmic wrapper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub base: BaseLoss,
    pub smooth: f64,
    pub wrap: Option<AllParams>,
}

impl LossSpec {
    pub fn plain(base: BaseLoss) -> Self {
        Self {
            base,
            smooth: DEFAULT_SMOOTH,
            wrap: None,
        }
    }

    pub fn wrapped(base: BaseLoss, params: AllParams) -> Self {
        Self {
            base,
            smooth: DEFAULT_SMOOTH,
            wrap: Some(params),
        }
    }

    pub fn eval(&self, p: &ProbMap, g: &BinMask) -> Result<LossEval> {
        let base = self.base.eval(p, g, self.smooth)?;
        match &self.wrap {
            Some(params) => params.wrap(base),
            None => Ok(base),
        }
    }

    /// Short label such as `dice` or `all-dice`.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.wrap.is_some() {
            write!(f, "all-")?;
        }
        f.write_str(self.base.name())
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    /// Accepts a base loss name, optionally prefixed with `all-` for the
    /// default adaptive wrapper. `all` alone means the wrapped Dice loss.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "all" {
            return Ok(LossSpec::wrapped(BaseLoss::Dice, AllParams::default()));
        }
        match s.strip_prefix("all-") {
            Some(rest) => Ok(LossSpec::wrapped(rest.parse()?, AllParams::default())),
            None => Ok(LossSpec::plain(s.parse()?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for name in BaseLoss::NAMES {
            let plain: LossSpec = name.parse().unwrap();
            assert_eq!(plain.label(), name);
            let wrapped: LossSpec = format!("all-{name}").parse().unwrap();
            assert_eq!(wrapped.label(), format!("all-{name}"));
        }
        assert_eq!("all".parse::<LossSpec>().unwrap().label(), "all-dice");
        assert!("hinge".parse::<LossSpec>().is_err());
    }
}

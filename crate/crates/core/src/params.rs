//! Model parameters and their validity constraints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which Wright-Fisher construction is in force.
///
/// `General` lets mutation run at rate proportional to `theta + alpha` and
/// uses the migration weight `r`. `ThetaNonneg` requires `theta >= 0`, lets
/// `theta` alone drive mutation and uses the migration weight `r_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    #[default]
    General,
    ThetaNonneg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct Params {
    theta: f64,
    alpha: f64,
    regime: Regime,
}

impl Params {
    pub fn new(theta: f64, alpha: f64, regime: Regime) -> Result<Self> {
        validate_params(theta, alpha, regime)
    }

    /// Shorthand for the `General` regime.
    pub fn general(theta: f64, alpha: f64) -> Result<Self> {
        validate_params(theta, alpha, Regime::General)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Total intensity driving uniform mutation: `theta + alpha` in the
    /// general regime, `theta` when the roles are separated.
    pub fn mutation_intensity(&self) -> f64 {
        match self.regime {
            Regime::General => self.theta + self.alpha,
            Regime::ThetaNonneg => self.theta,
        }
    }
}

#[derive(Deserialize)]
struct RawParams {
    theta: f64,
    alpha: f64,
    #[serde(default)]
    regime: Regime,
}

impl TryFrom<RawParams> for Params {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        validate_params(raw.theta, raw.alpha, raw.regime)
    }
}

pub fn validate_params(theta: f64, alpha: f64, regime: Regime) -> Result<Params> {
    if !theta.is_finite() || !alpha.is_finite() {
        return Err(Error::InvalidParams(format!(
            "theta and alpha must be finite (theta = {theta}, alpha = {alpha})"
        )));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParams(format!(
            "0 <= alpha < 1 violated (alpha = {alpha})"
        )));
    }
    match regime {
        Regime::General if theta <= -alpha => Err(Error::InvalidParams(format!(
            "theta > -alpha violated (theta = {theta}, alpha = {alpha})"
        ))),
        Regime::ThetaNonneg if theta < 0.0 => Err(Error::InvalidParams(format!(
            "theta >= 0 violated in the theta_nonneg regime (theta = {theta})"
        ))),
        _ => Ok(Params {
            theta,
            alpha,
            regime,
        }),
    }
}

//! Space-time norms used to measure the distance between the wave and its limit.

use serde::{Deserialize, Serialize};
use skwave::{bochner_norm, w_lambda_r_seminorm, BochnerSpec, Field, TimeGrid};

use crate::LabError;

/// Slack kept away from every strict exponent bound.
pub const STRICT_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", deny_unknown_fields)]
pub enum NormSpec {
    /// `L^q(0, T; H^a)` with `q < q(a)`.
    X1 {
        a: f64,
        #[serde(default = "two")]
        q: f64,
    },
    /// `L^p(0, T; H^{-delta})` with `p < theta + 1`.
    X2 {
        delta: f64,
        #[serde(default = "two")]
        p: f64,
    },
    /// `L^p(0, T; H^a)` with `p < 2 / a`; `rho` is the growth exponent of the diffusion.
    X3 {
        a: f64,
        #[serde(default = "two")]
        p: f64,
        #[serde(default)]
        rho: f64,
    },
    #[serde(rename = "W_lambda_r")]
    WLambdaR {
        lambda: f64,
        r: f64,
        #[serde(default)]
        index: f64,
    },
    #[serde(rename = "C_H")]
    CH,
}

fn two() -> f64 {
    2.0
}

/// Largest admissible time exponent `2 (theta + 1) / (2 + (theta - 1) a)` of `X1(a)`.
pub fn q_of_a(theta: f64, a: f64) -> f64 {
    2.0 * (theta + 1.0) / (2.0 + (theta - 1.0) * a)
}

/// Time exponent `(theta + 1) / (2 (theta + 1 - 2 rho))` attached to growth `rho`.
pub fn beta_of_rho(theta: f64, rho: f64) -> f64 {
    (theta + 1.0) / (2.0 * (theta + 1.0 - 2.0 * rho))
}

fn below(value: f64, bound: f64, what: &str) -> Result<(), LabError> {
    if value < bound - STRICT_MARGIN {
        Ok(())
    } else {
        Err(LabError::InvalidArgument(format!(
            "{what} = {value} must be strictly below {bound}"
        )))
    }
}

fn at_least_one(value: f64, what: &str) -> Result<(), LabError> {
    if value >= 1.0 && value.is_finite() {
        Ok(())
    } else {
        Err(LabError::InvalidArgument(format!("{what} must be a finite exponent >= 1, got {value}")))
    }
}

impl NormSpec {
    pub fn family(&self) -> &'static str {
        match self {
            Self::X1 { .. } => "X1",
            Self::X2 { .. } => "X2",
            Self::X3 { .. } => "X3",
            Self::WLambdaR { .. } => "W_lambda_r",
            Self::CH => "C_H",
        }
    }

    /// Spatial parameter reported in output tables.
    pub fn a_or_delta(&self) -> f64 {
        match *self {
            Self::X1 { a, .. } | Self::X3 { a, .. } => a,
            Self::X2 { delta, .. } => delta,
            Self::WLambdaR { lambda, .. } => lambda,
            Self::CH => 0.0,
        }
    }

    /// Time exponent reported in output tables.
    pub fn q_or_p(&self) -> f64 {
        match *self {
            Self::X1 { q, .. } => q,
            Self::X2 { p, .. } | Self::X3 { p, .. } => p,
            Self::WLambdaR { r, .. } => r,
            Self::CH => f64::INFINITY,
        }
    }

    /// Checks the exponent constraints for a reaction of growth `theta`.
    pub fn check(&self, theta: f64) -> Result<(), LabError> {
        match *self {
            Self::X1 { a, q } => {
                if !(0.0..=1.0).contains(&a) {
                    return Err(LabError::InvalidArgument(format!("X1 needs a in [0, 1], got {a}")));
                }
                at_least_one(q, "X1 exponent q")?;
                below(q, q_of_a(theta, a), "X1 exponent q")
            }
            Self::X2 { delta, p } => {
                if !(delta > 0.0 && delta <= 1.0) {
                    return Err(LabError::InvalidArgument(format!(
                        "X2 needs delta in (0, 1], got {delta}"
                    )));
                }
                at_least_one(p, "X2 exponent p")?;
                below(p, theta + 1.0, "X2 exponent p")
            }
            Self::X3 { a, p, rho } => {
                if !(a > 0.0 && a <= 1.0) {
                    return Err(LabError::InvalidArgument(format!("X3 needs a in (0, 1], got {a}")));
                }
                if rho < 0.0 {
                    return Err(LabError::InvalidArgument(format!("X3 needs rho >= 0, got {rho}")));
                }
                below(rho, (theta + 1.0) / 4.0, "X3 growth rho")?;
                at_least_one(p, "X3 exponent p")?;
                below(p, 2.0 / a, "X3 exponent p")
            }
            Self::WLambdaR { lambda, r, index } => {
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(LabError::InvalidArgument(format!(
                        "W_lambda_r needs lambda in (0, 1), got {lambda}"
                    )));
                }
                if !(r > 1.0 && r.is_finite()) {
                    return Err(LabError::InvalidArgument(format!("W_lambda_r needs r > 1, got {r}")));
                }
                if !(-1.0..=1.0).contains(&index) {
                    return Err(LabError::InvalidArgument(format!(
                        "W_lambda_r needs a Sobolev index in [-1, 1], got {index}"
                    )));
                }
                Ok(())
            }
            Self::CH => Ok(()),
        }
    }

    /// Value on a trajectory sampled at every point of `grid`.
    pub fn evaluate(&self, traj: &[Field], grid: &TimeGrid) -> Result<f64, LabError> {
        let value = match *self {
            Self::X1 { a, q } => bochner_norm(traj, grid, &BochnerSpec::new(q, a)?)?,
            Self::X2 { delta, p } => bochner_norm(traj, grid, &BochnerSpec::new(p, -delta)?)?,
            Self::X3 { a, p, .. } => bochner_norm(traj, grid, &BochnerSpec::new(p, a)?)?,
            Self::WLambdaR { lambda, r, index } => w_lambda_r_seminorm(traj, grid, lambda, r, index)?,
            Self::CH => bochner_norm(traj, grid, &BochnerSpec::sup_h())?,
        };
        Ok(value)
    }
}

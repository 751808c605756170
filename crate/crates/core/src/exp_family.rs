//! Exponential-family marginals with canonical links.
//!
//! For density `exp{(y theta - a(theta) + b(y)) / phi}` with
//! `theta = h(eta)`, the mean is `a'(theta)` and the variance
//! `phi a''(theta)`. The fourth standardized moment used by the
//! pseudo-expectation is `3 + phi a''''(theta) / a''(theta)^2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GcrError, Result};

/// Linear predictors for the Bernoulli family are clamped to this range.
pub const BERNOULLI_ETA_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Poisson,
    Bernoulli,
    Gamma,
}

impl Family {
    /// `phi` is fixed at one for Poisson and Bernoulli responses.
    pub fn dispersion_known(self) -> bool {
        matches!(self, Family::Poisson | Family::Bernoulli)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Poisson => "poisson",
            Family::Bernoulli => "bernoulli",
            Family::Gamma => "gamma",
        }
    }

    /// Canonical parameter `theta = h(eta)`.
    pub fn theta(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian | Family::Poisson => eta,
            Family::Bernoulli => eta.clamp(-BERNOULLI_ETA_CLAMP, BERNOULLI_ETA_CLAMP),
            Family::Gamma => -(-eta).exp(),
        }
    }

    /// Derivatives `a'(theta) .. a''''(theta)` of the cumulant function.
    pub fn cumulant_derivatives(self, theta: f64) -> [f64; 4] {
        match self {
            Family::Gaussian => [theta, 1.0, 0.0, 0.0],
            Family::Poisson => {
                let e = theta.exp();
                [e, e, e, e]
            }
            Family::Bernoulli => {
                let p = logistic(theta);
                let v = p * (1.0 - p);
                [p, v, v * (1.0 - 2.0 * p), v * (1.0 - 6.0 * p + 6.0 * p * p)]
            }
            Family::Gamma => {
                // a(theta) = -ln(-theta), theta < 0
                let t = theta;
                [-1.0 / t, 1.0 / (t * t), -2.0 / (t * t * t), 6.0 / (t * t * t * t)]
            }
        }
    }

    /// Checks that a response value lies in the family's support.
    pub fn validate_response(self, y: f64) -> Result<()> {
        let ok = y.is_finite()
            && match self {
                Family::Gaussian => true,
                Family::Poisson => y >= 0.0 && y.fract() == 0.0,
                Family::Bernoulli => y == 0.0 || y == 1.0,
                Family::Gamma => y > 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(GcrError::Validation(format!(
                "response {y} is outside the support of the {} family",
                self.name()
            )))
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = GcrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Family::Gaussian),
            "poisson" => Ok(Family::Poisson),
            "bernoulli" => Ok(Family::Bernoulli),
            "gamma" => Ok(Family::Gamma),
            other => Err(GcrError::Validation(format!(
                "unknown family '{other}' (expected gaussian, poisson, bernoulli or gamma)"
            ))),
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Marginal moments of one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBundle {
    pub theta: f64,
    pub mu: f64,
    /// `a''(theta)`, the variance divided by `phi`.
    pub var_unit: f64,
    /// `a''''(theta) / a''(theta)^2`.
    pub kurt_ratio: f64,
    /// `d mu / d eta = a''(theta) h'(eta)`.
    pub dmu_deta: f64,
}

impl MomentBundle {
    /// `E(eps^4)` of the standardized response.
    pub fn fourth_moment(&self, phi: f64) -> f64 {
        3.0 + phi * self.kurt_ratio
    }
}

pub fn family_moments(family: Family, eta: f64, phi: f64) -> Result<MomentBundle> {
    if !eta.is_finite() {
        return Err(GcrError::Validation(format!("linear predictor {eta} is not finite")));
    }
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(GcrError::Validation(format!("dispersion {phi} must be positive")));
    }
    Ok(moments_unchecked(family, eta))
}

/// [`family_moments`] without argument validation, for inner loops.
#[inline]
pub(crate) fn moments_unchecked(family: Family, eta: f64) -> MomentBundle {
    let theta = family.theta(eta);
    let [a1, a2, _, a4] = family.cumulant_derivatives(theta);
    let kurt_ratio = match family {
        Family::Gaussian => 0.0,
        _ => a4 / (a2 * a2),
    };
    let dmu_deta = match family {
        Family::Gamma => a2 * (-eta).exp(),
        Family::Bernoulli if eta.abs() > BERNOULLI_ETA_CLAMP => 0.0,
        _ => a2,
    };
    MomentBundle { theta, mu: a1, var_unit: a2, kurt_ratio, dmu_deta }
}

/// `(y - a'(theta)) / sqrt(a''(theta))`; `phi` does not enter.
pub fn pearson_residual(family: Family, y: f64, eta: f64, phi: f64) -> Result<f64> {
    let m = family_moments(family, eta, phi)?;
    if m.var_unit < 1e-300 {
        return Err(GcrError::Numerical(format!(
            "variance function underflow at eta = {eta}"
        )));
    }
    Ok((y - m.mu) / m.var_unit.sqrt())
}

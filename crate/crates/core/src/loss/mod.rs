//! The asymmetric squared loss behind expectiles.
//!
//! For a level `ω ∈ (0, 1)` the loss is
//!
//! ```text
//! φ_ω(t) = (1 - ω) t²   for t ≤ 0
//!          ω t²         for t > 0
//! ```
//!
//! Its derivative is Lipschitz with constant `2 max(1 - ω, ω)`, which is what
//! makes the quadratic majorizer used by the solver possible. The convex
//! conjugate is exposed as well because it gives an independent dual
//! characterisation of the fitted coefficients.

mod distribution;

pub use distribution::{MixtureComponent, ScalarDistribution};

use serde::{Deserialize, Serialize};

use crate::error::{KereError, Result};

/// An expectile level `ω`, validated to lie strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ExpectileLevel(f64);

impl ExpectileLevel {
    pub fn new(omega: f64) -> Result<Self> {
        if omega.is_finite() && omega > 0.0 && omega < 1.0 {
            Ok(ExpectileLevel(omega))
        } else {
            Err(KereError::InvalidLevel(omega))
        }
    }

    /// The mean (`ω = 0.5`).
    pub fn median_like() -> Self {
        ExpectileLevel(0.5)
    }

    #[inline]
    pub fn omega(self) -> f64 {
        self.0
    }

    /// `max(1 - ω, ω)`, the curvature used by the majorizer.
    #[inline]
    pub fn weight_max(self) -> f64 {
        self.0.max(1.0 - self.0)
    }

    /// `min(1 - ω, ω)`, the smallest curvature of the loss.
    #[inline]
    pub fn weight_min(self) -> f64 {
        self.0.min(1.0 - self.0)
    }

    /// Weight applied to `t²` on the side of the kink where `t` lives.
    #[inline]
    pub fn weight(self, t: f64) -> f64 {
        if t > 0.0 {
            self.0
        } else {
            1.0 - self.0
        }
    }

    #[inline]
    pub fn loss(self, t: f64) -> f64 {
        self.weight(t) * t * t
    }

    #[inline]
    pub fn derivative(self, t: f64) -> f64 {
        2.0 * self.weight(t) * t
    }

    /// Lipschitz constant of [`derivative`](Self::derivative): `2 max(1 - ω, ω)`.
    #[inline]
    pub fn lipschitz(self) -> f64 {
        2.0 * self.weight_max()
    }

    /// Convex conjugate `φ*_ω(s)`.
    #[inline]
    pub fn conjugate(self, s: f64) -> f64 {
        s * s / (4.0 * self.weight(s))
    }

    /// Derivative of the conjugate; the functional inverse of [`derivative`](Self::derivative).
    #[inline]
    pub fn conjugate_derivative(self, s: f64) -> f64 {
        s / (2.0 * self.weight(s))
    }

    /// Value of the quadratic upper bound of `φ_ω(a)` built at `b`.
    pub fn majorizer(self, a: f64, b: f64) -> f64 {
        let d = a - b;
        self.loss(b) + self.derivative(b) * d + 0.5 * self.lipschitz() * d * d
    }
}

impl TryFrom<f64> for ExpectileLevel {
    type Error = KereError;

    fn try_from(value: f64) -> Result<Self> {
        ExpectileLevel::new(value)
    }
}

impl From<ExpectileLevel> for f64 {
    fn from(level: ExpectileLevel) -> f64 {
        level.0
    }
}

impl std::fmt::Display for ExpectileLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `φ_ω(t)`.
pub fn loss_value(t: f64, level: ExpectileLevel) -> f64 {
    level.loss(t)
}

/// `φ'_ω(t)`.
pub fn loss_grad(t: f64, level: ExpectileLevel) -> f64 {
    level.derivative(t)
}

pub fn lipschitz_constant(level: ExpectileLevel) -> f64 {
    level.lipschitz()
}

/// `φ*_ω(t)`.
pub fn conjugate_value(t: f64, level: ExpectileLevel) -> f64 {
    level.conjugate(t)
}

/// The `ω`-expectile of a scalar distribution; see
/// [`ScalarDistribution::expectile`].
pub fn population_expectile(
    dist: &ScalarDistribution,
    level: ExpectileLevel,
    tol: f64,
) -> Result<f64> {
    dist.expectile(level, tol)
}

//! Exponential-family observation models.
//!
//! A model is a log-partition function `G` with its first two derivatives:
//! responses follow `h(y) exp(θ y - G(θ))`, so `E[y | θ] = G'(θ)` and the
//! centered response `y - G'(θ)` is the martingale-difference noise the bounds
//! are stated for. Each family implements [`ExponentialFamily`]; families are
//! looked up by name through [`ModelRegistry`].

mod families;
mod registry;

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use families::{Binomial, Exponential, Gaussian, Poisson};
pub use registry::{FamilyBuilder, FamilyParams, ModelRegistry};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    SubGaussian,
    SubExponential,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::SubGaussian => "sub_gaussian",
            NoiseKind::SubExponential => "sub_exponential",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Conditional MGF class of the noise process.
///
/// Sub-Gaussian with proxy `σ`: `E exp(sε) ≤ exp(s²σ²/2)` for all `s`.
/// Sub-exponential with parameter `λ`: the same bound with `λ`, for `|s| ≤ 1/λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseClass {
    pub kind: NoiseKind,
    pub parameter: f64,
}

impl NoiseClass {
    pub fn new(kind: NoiseKind, parameter: f64) -> Result<Self> {
        if !(parameter > 0.0 && parameter.is_finite()) {
            return Err(Error::param(format!(
                "noise parameter must be positive, got {parameter}"
            )));
        }
        Ok(NoiseClass { kind, parameter })
    }

    pub fn sub_gaussian(sigma: f64) -> Result<Self> {
        NoiseClass::new(NoiseKind::SubGaussian, sigma)
    }

    pub fn sub_exponential(lambda: f64) -> Result<Self> {
        NoiseClass::new(NoiseKind::SubExponential, lambda)
    }

    /// Upper bound on `log E exp(sε)`, or `None` where the class says nothing.
    pub fn log_mgf_bound(&self, s: f64) -> Option<f64> {
        match self.kind {
            NoiseKind::SubExponential if s.abs() > 1.0 / self.parameter => None,
            _ => Some(0.5 * s * s * self.parameter * self.parameter),
        }
    }
}

/// Which derivative of the log-partition function to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkOrder {
    /// `G`
    Value,
    /// `G'`, the mean (link) function
    First,
    /// `G''`, the variance function
    Second,
}

impl TryFrom<u8> for LinkOrder {
    type Error = Error;

    fn try_from(order: u8) -> Result<Self> {
        match order {
            0 => Ok(LinkOrder::Value),
            1 => Ok(LinkOrder::First),
            2 => Ok(LinkOrder::Second),
            n => Err(Error::param(format!(
                "derivative order {n} not in {{0, 1, 2}}"
            ))),
        }
    }
}

/// A natural exponential family, identified by its log-partition function.
///
/// Methods other than [`ExponentialFamily::in_domain`] assume their argument
/// is in the natural domain; [`ModelSpec`] performs the checks.
pub trait ExponentialFamily: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn in_domain(&self, x: f64) -> bool {
        x.is_finite()
    }

    /// `G(x)`
    fn log_partition(&self, x: f64) -> f64;

    /// `G'(x)`
    fn mean(&self, x: f64) -> f64;

    /// `G''(x)`
    fn variance(&self, x: f64) -> f64;

    /// `B_G(x, y) = G(x) - G(y) - G'(y)(x - y)`.
    fn bregman(&self, x: f64, y: f64) -> f64 {
        self.log_partition(x) - self.log_partition(y) - self.mean(y) * (x - y)
    }

    /// Interval of admissible natural parameters under box bound `gamma`.
    fn parameter_interval(&self, gamma: f64) -> Result<(f64, f64)> {
        Ok((-gamma, gamma))
    }

    /// Whether [`ExponentialFamily::parameter_interval`] is the symmetric
    /// box `[-γ, γ]`.
    fn symmetric_box(&self) -> bool {
        true
    }

    /// `(min G'', max G'')` over `[lo, hi]`.
    fn curvature_bounds(&self, lo: f64, hi: f64) -> (f64, f64);

    /// Noise class valid uniformly for natural parameters in `[lo, hi]`.
    fn noise_class(&self, lo: f64, hi: f64) -> NoiseClass;

    /// Draw a response with natural parameter `x`.
    fn sample(&self, x: f64, rng: &mut dyn RngCore) -> f64;
}

/// A family together with the box bound `γ` on the target entries.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    family: Arc<dyn ExponentialFamily>,
    gamma: f64,
    interval: (f64, f64),
}

impl ModelSpec {
    pub fn new(family: Arc<dyn ExponentialFamily>, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::param(format!("gamma must be positive, got {gamma}")));
        }
        let interval = family.parameter_interval(gamma)?;
        Ok(ModelSpec {
            family,
            gamma,
            interval,
        })
    }

    /// Build from a registered family name using the builtin registry.
    pub fn from_name(name: &str, params: &FamilyParams, gamma: f64) -> Result<Self> {
        let family = ModelRegistry::default().build(name, params)?;
        ModelSpec::new(family, gamma)
    }

    pub fn family(&self) -> &dyn ExponentialFamily {
        self.family.as_ref()
    }

    pub fn name(&self) -> &'static str {
        self.family.name()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Natural-parameter interval the curvature and noise constants refer to.
    pub fn parameter_interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn check_domain(&self, x: f64) -> Result<()> {
        if self.family.in_domain(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                family: self.family.name(),
                x,
            })
        }
    }

    pub fn link_eval(&self, x: f64, order: LinkOrder) -> Result<f64> {
        self.check_domain(x)?;
        Ok(match order {
            LinkOrder::Value => self.family.log_partition(x),
            LinkOrder::First => self.family.mean(x),
            LinkOrder::Second => self.family.variance(x),
        })
    }

    /// `(l_γ, u_γ)`: extrema of `G''` over the parameter interval.
    pub fn curvature_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.interval;
        self.family.curvature_bounds(lo, hi)
    }

    pub fn noise_class(&self) -> NoiseClass {
        let (lo, hi) = self.interval;
        self.family.noise_class(lo, hi)
    }

    pub fn sample_response(&self, theta: f64, rng: &mut dyn RngCore) -> Result<f64> {
        self.check_domain(theta)?;
        Ok(self.family.sample(theta, rng))
    }
}

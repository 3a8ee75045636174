use rand::RngCore;
use rand_distr::{Distribution, Exp, Poisson as PoissonDist, StandardNormal};

use super::{ExponentialFamily, NoiseClass, NoiseKind};
use crate::{Error, Result};

/// `G(x) = σ²x²/2`; responses are `N(σ²x, σ²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian {
    sigma: f64,
}

impl Gaussian {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        Ok(Gaussian { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl ExponentialFamily for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn log_partition(&self, x: f64) -> f64 {
        self.sigma * self.sigma * x * x / 2.0
    }

    fn mean(&self, x: f64) -> f64 {
        self.sigma * self.sigma * x
    }

    fn variance(&self, _x: f64) -> f64 {
        self.sigma * self.sigma
    }

    fn bregman(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        self.sigma * self.sigma * d * d / 2.0
    }

    fn curvature_bounds(&self, _lo: f64, _hi: f64) -> (f64, f64) {
        let v = self.sigma * self.sigma;
        (v, v)
    }

    fn noise_class(&self, _lo: f64, _hi: f64) -> NoiseClass {
        NoiseClass {
            kind: NoiseKind::SubGaussian,
            parameter: self.sigma,
        }
    }

    fn sample(&self, x: f64, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean(x) + self.sigma * z
    }
}

/// `G(x) = N log(1 + eˣ)`; responses are `Binomial(N, eˣ/(1 + eˣ))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Binomial {
    trials: u32,
}

impl Binomial {
    pub fn new(trials: u32) -> Result<Self> {
        if trials == 0 {
            return Err(Error::param("binomial trials must be at least 1"));
        }
        Ok(Binomial { trials })
    }

    pub fn trials(&self) -> u32 {
        self.trials
    }

    fn n(&self) -> f64 {
        f64::from(self.trials)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ExponentialFamily for Binomial {
    fn name(&self) -> &'static str {
        "binomial"
    }

    fn log_partition(&self, x: f64) -> f64 {
        self.n() * softplus(x)
    }

    fn mean(&self, x: f64) -> f64 {
        self.n() * sigmoid(x)
    }

    fn variance(&self, x: f64) -> f64 {
        // symmetric in x; written in terms of e^{-|x|} to avoid overflow
        let e = (-x.abs()).exp();
        self.n() * e / ((1.0 + e) * (1.0 + e))
    }

    fn curvature_bounds(&self, lo: f64, hi: f64) -> (f64, f64) {
        // G'' decreases in |x|
        let nearest = if lo <= 0.0 && hi >= 0.0 {
            0.0
        } else {
            lo.abs().min(hi.abs())
        };
        let farthest = lo.abs().max(hi.abs());
        (self.variance(farthest), self.variance(nearest))
    }

    /// Responses live in `[0, N]`, so Hoeffding's lemma gives proxy `N/2`.
    fn noise_class(&self, _lo: f64, _hi: f64) -> NoiseClass {
        NoiseClass {
            kind: NoiseKind::SubGaussian,
            parameter: self.n() / 2.0,
        }
    }

    fn sample(&self, x: f64, rng: &mut dyn RngCore) -> f64 {
        let p = sigmoid(x);
        let dist =
            rand_distr::Binomial::new(u64::from(self.trials), p).expect("sigmoid is a probability");
        dist.sample(rng) as f64
    }
}

/// `G(x) = eˣ`; responses are `Poisson(eˣ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Poisson;

impl ExponentialFamily for Poisson {
    fn name(&self) -> &'static str {
        "poisson"
    }

    fn log_partition(&self, x: f64) -> f64 {
        x.exp()
    }

    fn mean(&self, x: f64) -> f64 {
        x.exp()
    }

    fn variance(&self, x: f64) -> f64 {
        x.exp()
    }

    fn bregman(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        y.exp() * (d.exp_m1() - d)
    }

    fn curvature_bounds(&self, lo: f64, hi: f64) -> (f64, f64) {
        (lo.exp(), hi.exp())
    }

    /// With `μ = eˣ ≤ e^hi`, `μ(eˢ - 1 - s) ≤ μs²` on `|s| ≤ 1`, so
    /// `λ = max(√(2e^hi), 1)` works.
    fn noise_class(&self, _lo: f64, hi: f64) -> NoiseClass {
        NoiseClass {
            kind: NoiseKind::SubExponential,
            parameter: (2.0 * hi.exp()).sqrt().max(1.0),
        }
    }

    fn sample(&self, x: f64, rng: &mut dyn RngCore) -> f64 {
        let dist = PoissonDist::new(x.exp()).expect("positive rate");
        dist.sample(rng)
    }
}

/// `G(x) = -log(-x)` on `x < 0`; responses are `Exp(rate = -x)`.
///
/// The natural domain excludes zero, so the box is `[-γ, -γ_lo]` rather than
/// `[-γ, γ]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponential {
    gamma_lo: f64,
}

impl Exponential {
    pub fn new(gamma_lo: f64) -> Result<Self> {
        if !(gamma_lo > 0.0 && gamma_lo.is_finite()) {
            return Err(Error::param(format!(
                "exponential gamma_lo must be positive, got {gamma_lo}"
            )));
        }
        Ok(Exponential { gamma_lo })
    }

    pub fn gamma_lo(&self) -> f64 {
        self.gamma_lo
    }
}

impl ExponentialFamily for Exponential {
    fn name(&self) -> &'static str {
        "exponential"
    }

    fn in_domain(&self, x: f64) -> bool {
        x.is_finite() && x < 0.0
    }

    fn log_partition(&self, x: f64) -> f64 {
        -(-x).ln()
    }

    fn mean(&self, x: f64) -> f64 {
        -1.0 / x
    }

    fn variance(&self, x: f64) -> f64 {
        1.0 / (x * x)
    }

    fn bregman(&self, x: f64, y: f64) -> f64 {
        let r1 = x / y - 1.0;
        r1 - r1.ln_1p()
    }

    fn parameter_interval(&self, gamma: f64) -> Result<(f64, f64)> {
        if gamma <= self.gamma_lo {
            return Err(Error::param(format!(
                "exponential family needs gamma > gamma_lo ({gamma} <= {})",
                self.gamma_lo
            )));
        }
        Ok((-gamma, -self.gamma_lo))
    }

    fn symmetric_box(&self) -> bool {
        false
    }

    fn curvature_bounds(&self, lo: f64, hi: f64) -> (f64, f64) {
        (self.variance(lo), self.variance(hi))
    }

    /// A centered `Exp` with mean `m` satisfies the sub-exponential MGF bound
    /// with `λ = 2m`; the largest mean on `[lo, hi]` is `-1/hi`.
    fn noise_class(&self, _lo: f64, hi: f64) -> NoiseClass {
        NoiseClass {
            kind: NoiseKind::SubExponential,
            parameter: 2.0 * self.mean(hi),
        }
    }

    fn sample(&self, x: f64, rng: &mut dyn RngCore) -> f64 {
        Exp::new(-x).expect("positive rate").sample(rng)
    }
}

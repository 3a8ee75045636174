//! Monte Carlo checks of the always-valid matrix martingale tails.
//!
//! For matrices `X_i` and martingale-difference noise `ε_i`, the partial sums
//! `Z_k = Σ_{i≤k} X_i ε_i` satisfy, with `S_k = max(‖Σ X_i X_iᵀ‖_op, ‖Σ X_iᵀ X_i‖_op)`:
//!
//! - sub-Gaussian `σ`: `P(∃k: ‖Z_k‖_op ≥ t, S_k ≤ w) ≤ (d1 + d2) exp(-√2 t² / (16 σ² w))`
//! - sub-exponential `λ`, `‖X_i‖_op ≤ x_max`: the same event has probability at
//!   most `(d1 + d2) exp(-t² / (576 λ² w))` when `t ≤ 24 λ w / x_max` and
//!   `(d1 + d2) exp(-t / (24 λ x_max))` otherwise.
//!
//! The validators simulate many independent trials and compare the empirical
//! frequency of the event with the tail, allowing three binomial standard
//! errors of Monte Carlo slack.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{dilation, matrix_norm, Matrix, NormKind};
use crate::models::{NoiseClass, NoiseKind};
use crate::rng::stream_rng;
use crate::stream::next_index;
use crate::{Error, Result};

/// How the design matrices `X_i` are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixSource {
    /// `E_{π_i}` with `π_i` uniform over the entries.
    Elementary,
    /// Uniform(-1, 1) entries, rescaled so that `‖X_i‖_op = u x_max` with
    /// `u ~ Uniform(0, 1]`.
    RandomBounded { x_max: f64 },
}

impl MatrixSource {
    /// Bound on `‖X_i‖_op`.
    pub fn x_max(&self) -> f64 {
        match *self {
            MatrixSource::Elementary => 1.0,
            MatrixSource::RandomBounded { x_max } => x_max,
        }
    }
}

/// Distribution of the noise `ε_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSource {
    Zero,
    Gaussian {
        sigma: f64,
    },
    /// `Poisson(mean) - mean`.
    CenteredPoisson {
        mean: f64,
    },
}

impl NoiseSource {
    /// Noise class the tails are evaluated with.
    pub fn class(&self) -> Result<NoiseClass> {
        match *self {
            NoiseSource::Zero => NoiseClass::sub_gaussian(f64::MIN_POSITIVE),
            NoiseSource::Gaussian { sigma } => NoiseClass::sub_gaussian(sigma),
            NoiseSource::CenteredPoisson { mean } => {
                NoiseClass::sub_exponential((2.0 * mean).sqrt().max(1.0))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            NoiseSource::Zero => Ok(()),
            NoiseSource::Gaussian { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            NoiseSource::CenteredPoisson { mean } if mean > 0.0 && mean.is_finite() => Ok(()),
            other => Err(Error::param(format!("invalid noise source {other:?}"))),
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match *self {
            NoiseSource::Zero => 0.0,
            NoiseSource::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseSource::CenteredPoisson { mean } => {
                let y: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
                y - mean
            }
        }
    }
}

/// Dimensions, horizon and sources of one simulated martingale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailExperiment {
    pub d1: usize,
    pub d2: usize,
    pub horizon: usize,
    pub source: MatrixSource,
    pub noise: NoiseSource,
}

impl TailExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.d2 == 0 {
            return Err(Error::param("dimensions must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::param("horizon must be at least 1"));
        }
        if let MatrixSource::RandomBounded { x_max } = self.source {
            if !(x_max > 0.0 && x_max.is_finite()) {
                return Err(Error::param(format!("x_max must be positive, got {x_max}")));
            }
        }
        self.noise.validate()
    }
}

/// Running statistics after step `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MartingaleStep {
    pub k: usize,
    /// `‖Σ_{i≤k} X_i ε_i‖_op`
    pub sum_norm: f64,
    /// `S_k`, unnormalized.
    pub s_k: f64,
    /// `max_{i≤k} ‖X_i‖_op`
    pub x_norm_max: f64,
}

/// Walks one martingale forward a step at a time.
struct Walker<'a> {
    exp: &'a TailExperiment,
    sum: Matrix,
    row_gram: Matrix,
    col_gram: Matrix,
    row_counts: Vec<usize>,
    col_counts: Vec<usize>,
    k: usize,
    x_norm_max: f64,
    check_dilation: bool,
}

impl<'a> Walker<'a> {
    fn new(exp: &'a TailExperiment, check_dilation: bool) -> Self {
        Walker {
            exp,
            sum: Matrix::zeros(exp.d1, exp.d2),
            row_gram: Matrix::zeros(exp.d1, exp.d1),
            col_gram: Matrix::zeros(exp.d2, exp.d2),
            row_counts: vec![0; exp.d1],
            col_counts: vec![0; exp.d2],
            k: 0,
            x_norm_max: 0.0,
            check_dilation,
        }
    }

    fn step<R: Rng>(&mut self, rng: &mut R) -> Result<MartingaleStep> {
        let (d1, d2) = (self.exp.d1, self.exp.d2);
        let s_k = match self.exp.source {
            MatrixSource::Elementary => {
                let (i, j) = next_index(d1, d2, rng);
                let eps = self.exp.noise.sample(rng);
                self.sum[(i, j)] += eps;
                self.row_counts[i] += 1;
                self.col_counts[j] += 1;
                self.x_norm_max = 1.0;
                if self.check_dilation {
                    let mut x = Matrix::zeros(d1, d2);
                    x[(i, j)] = 1.0;
                    check_dilation_identity(&x)?;
                }
                let r = *self.row_counts.iter().max().expect("d1 >= 1");
                let c = *self.col_counts.iter().max().expect("d2 >= 1");
                r.max(c) as f64
            }
            MatrixSource::RandomBounded { x_max } => {
                let raw = Matrix::from_fn(d1, d2, |_, _| rng.random_range(-1.0..1.0));
                let norm = matrix_norm(&raw, NormKind::Operator)?;
                let u: f64 = 1.0 - rng.random::<f64>();
                let x = if norm > 0.0 {
                    raw.scale(u * x_max / norm)
                } else {
                    raw
                };
                let eps = self.exp.noise.sample(rng);
                let x_norm = if self.check_dilation {
                    check_dilation_identity(&x)?
                } else {
                    matrix_norm(&x, NormKind::Operator)?
                };
                self.x_norm_max = self.x_norm_max.max(x_norm);
                self.sum = self.sum.add_scaled(eps, &x);
                self.row_gram = self.row_gram.add(&x.matmul(&x.transpose()));
                self.col_gram = self.col_gram.add(&x.transpose().matmul(&x));
                matrix_norm(&self.row_gram, NormKind::Operator)?
                    .max(matrix_norm(&self.col_gram, NormKind::Operator)?)
            }
        };
        self.k += 1;
        Ok(MartingaleStep {
            k: self.k,
            sum_norm: matrix_norm(&self.sum, NormKind::Operator)?,
            s_k,
            x_norm_max: self.x_norm_max,
        })
    }
}

/// Checks `‖dilation(X)‖_op = ‖X‖_op` and returns the common value.
fn check_dilation_identity(x: &Matrix) -> Result<f64> {
    let direct = matrix_norm(x, NormKind::Operator)?;
    let dilated = matrix_norm(&dilation(x), NormKind::Operator)?;
    if (direct - dilated).abs() > 1e-10 * direct.max(1.0) {
        return Err(Error::param(format!(
            "dilation changed the operator norm: {direct} vs {dilated}"
        )));
    }
    Ok(direct)
}

/// Running partial-sum statistics over the experiment horizon.
pub fn simulate_martingale_sum<R: Rng>(
    exp: &TailExperiment,
    rng: &mut R,
) -> Result<Vec<MartingaleStep>> {
    exp.validate()?;
    let mut walker = Walker::new(exp, true);
    (0..exp.horizon).map(|_| walker.step(rng)).collect()
}

/// `(d1 + d2) exp(-√2 t² / (16 σ² w))`.
pub fn subgaussian_tail(d1: usize, d2: usize, sigma: f64, threshold: f64, budget: f64) -> f64 {
    (d1 + d2) as f64
        * (-std::f64::consts::SQRT_2 * threshold * threshold / (16.0 * sigma * sigma * budget))
            .exp()
}

/// Two-regime sub-exponential tail, switching at `t = 24 λ w / x_max`.
pub fn subexponential_tail(
    d1: usize,
    d2: usize,
    lambda: f64,
    x_max: f64,
    threshold: f64,
    budget: f64,
) -> f64 {
    let exponent = if threshold <= 24.0 * lambda * budget / x_max {
        -threshold * threshold / (576.0 * lambda * lambda * budget)
    } else {
        -threshold / (24.0 * lambda * x_max)
    };
    (d1 + d2) as f64 * exponent.exp()
}

/// Threshold `t` and budget `w` of the event `‖Z_k‖_op ≥ t, S_k ≤ w`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub threshold: f64,
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailParams {
    pub d1: usize,
    pub d2: usize,
    pub horizon: usize,
    pub noise_kind: NoiseKind,
    pub noise_parameter: f64,
    pub x_max: f64,
    pub threshold: f64,
    pub budget: f64,
}

/// Outcome at one `(t, w)` point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub tail_params: TailParams,
    pub theoretical_bound: f64,
    pub trials: usize,
    pub violations: usize,
    pub rate: f64,
    /// The tail is at least 1 and says nothing.
    pub vacuous: bool,
    /// `rate ≤ bound + 3 √(bound (1 - bound) / trials)`, or vacuous.
    pub passed: bool,
}

impl TailReport {
    pub fn slack(&self) -> f64 {
        let b = self.theoretical_bound.min(1.0);
        3.0 * (b * (1.0 - b) / self.trials as f64).sqrt()
    }
}

fn theoretical_bound(exp: &TailExperiment, class: &NoiseClass, point: &TailPoint) -> f64 {
    match class.kind {
        NoiseKind::SubGaussian => subgaussian_tail(
            exp.d1,
            exp.d2,
            class.parameter,
            point.threshold,
            point.budget,
        ),
        NoiseKind::SubExponential => subexponential_tail(
            exp.d1,
            exp.d2,
            class.parameter,
            exp.source.x_max(),
            point.threshold,
            point.budget,
        ),
    }
}

/// Whether one trial hits `‖Z_k‖_op ≥ t` at some `k` with `S_k ≤ w`.
fn trial_violates<R: Rng>(exp: &TailExperiment, point: &TailPoint, rng: &mut R) -> Result<bool> {
    let mut walker = Walker::new(exp, true);
    for _ in 0..exp.horizon {
        let step = walker.step(rng)?;
        if step.s_k > point.budget {
            // S_k never decreases
            return Ok(false);
        }
        if step.sum_norm >= point.threshold {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Empirical frequency of the tail event over `trials` independent trials;
/// trial `i` draws from `stream_rng(seed, i)`.
pub fn validate_tail(
    exp: &TailExperiment,
    point: TailPoint,
    trials: usize,
    seed: u64,
) -> Result<TailReport> {
    exp.validate()?;
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    if !(point.threshold >= 0.0 && point.budget > 0.0) {
        return Err(Error::param(format!(
            "need threshold >= 0 and budget > 0, got {point:?}"
        )));
    }
    let class = exp.noise.class()?;
    let bound = theoretical_bound(exp, &class, &point);
    let outcomes: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|i| trial_violates(exp, &point, &mut stream_rng(seed, i as u64)))
        .collect::<Result<_>>()?;
    let violations = outcomes.iter().filter(|&&v| v).count();
    let rate = violations as f64 / trials as f64;
    let mut report = TailReport {
        tail_params: TailParams {
            d1: exp.d1,
            d2: exp.d2,
            horizon: exp.horizon,
            noise_kind: class.kind,
            noise_parameter: class.parameter,
            x_max: exp.source.x_max(),
            threshold: point.threshold,
            budget: point.budget,
        },
        theoretical_bound: bound,
        trials,
        violations,
        rate,
        vacuous: bound >= 1.0,
        passed: false,
    };
    report.passed = report.vacuous || rate <= bound + report.slack();
    Ok(report)
}

/// Elementary design with Gaussian noise of scale `sigma`.
#[allow(clippy::too_many_arguments)]
pub fn validate_subgaussian_tail(
    trials: usize,
    d1: usize,
    d2: usize,
    horizon: usize,
    sigma: f64,
    threshold: f64,
    budget: f64,
    seed: u64,
) -> Result<TailReport> {
    let exp = TailExperiment {
        d1,
        d2,
        horizon,
        source: MatrixSource::Elementary,
        noise: NoiseSource::Gaussian { sigma },
    };
    validate_tail(&exp, TailPoint { threshold, budget }, trials, seed)
}

/// Random bounded design with centered Poisson noise of the given mean.
#[allow(clippy::too_many_arguments)]
pub fn validate_subexponential_tail(
    trials: usize,
    d1: usize,
    d2: usize,
    horizon: usize,
    poisson_mean: f64,
    x_max: f64,
    threshold: f64,
    budget: f64,
    seed: u64,
) -> Result<TailReport> {
    let exp = TailExperiment {
        d1,
        d2,
        horizon,
        source: MatrixSource::RandomBounded { x_max },
        noise: NoiseSource::CenteredPoisson { mean: poisson_mean },
    };
    validate_tail(&exp, TailPoint { threshold, budget }, trials, seed)
}

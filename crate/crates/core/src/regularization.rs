//! Anytime regularization schedules and the good-event diagnostic.
//!
//! With `L = ln((d1 + d2)/α)`:
//!
//! - sub-Gaussian noise with proxy `σ`: `λ_t = 8σ √(L S_t / t)`
//! - sub-exponential noise with parameter `λ`: `λ_t = 48λ (√(S_t L / t) + L / t)`
//!
//! The good event at time `t` is `λ_t ≥ 2 ‖∇Φ_t(Θ*)‖_op`, where the score
//! matrix is `(1/t) Σ (G'(Θ*[π_i]) - y_i) E_{π_i}`.

use serde::{Deserialize, Serialize};

use crate::linalg::{matrix_norm, Matrix, NormKind};
use crate::models::{ModelSpec, NoiseClass, NoiseKind};
use crate::stream::{EntryIndex, ObservationLog};
use crate::{Error, Result};

/// Confidence budget, dimensions and noise class shared by the schedules and
/// the bound formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub alpha: f64,
    pub d1: usize,
    pub d2: usize,
    pub noise: NoiseClass,
}

impl BoundConfig {
    pub fn new(alpha: f64, d1: usize, d2: usize, noise: NoiseClass) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if d1 == 0 || d2 == 0 {
            return Err(Error::param("dimensions must be positive"));
        }
        if !(noise.parameter > 0.0 && noise.parameter.is_finite()) {
            return Err(Error::param(format!(
                "noise parameter must be positive, got {}",
                noise.parameter
            )));
        }
        Ok(BoundConfig {
            alpha,
            d1,
            d2,
            noise,
        })
    }

    /// `ln((d1 + d2)/α)`.
    pub fn log_term(&self) -> f64 {
        ((self.d1 + self.d2) as f64 / self.alpha).ln()
    }
}

fn check_time(s_t: f64, t: usize) -> Result<()> {
    if t == 0 {
        return Err(Error::NoObservations);
    }
    if !(s_t > 0.0 && s_t <= 1.0) {
        return Err(Error::param(format!("S_t must lie in (0, 1], got {s_t}")));
    }
    Ok(())
}

fn expect_kind(cfg: &BoundConfig, expected: NoiseKind) -> Result<()> {
    if cfg.noise.kind != expected {
        return Err(Error::WrongNoiseKind {
            expected: expected.as_str(),
            actual: cfg.noise.kind.as_str(),
        });
    }
    Ok(())
}

pub fn lambda_subgaussian(cfg: &BoundConfig, s_t: f64, t: usize) -> Result<f64> {
    expect_kind(cfg, NoiseKind::SubGaussian)?;
    check_time(s_t, t)?;
    let sigma = cfg.noise.parameter;
    Ok(8.0 * sigma * (cfg.log_term() * s_t / t as f64).sqrt())
}

pub fn lambda_subexponential(cfg: &BoundConfig, s_t: f64, t: usize) -> Result<f64> {
    expect_kind(cfg, NoiseKind::SubExponential)?;
    check_time(s_t, t)?;
    let lambda = cfg.noise.parameter;
    let l = cfg.log_term();
    let t = t as f64;
    Ok(48.0 * lambda * ((s_t * l / t).sqrt() + l / t))
}

/// Schedule matching the configured noise class.
pub fn lambda_schedule(cfg: &BoundConfig, s_t: f64, t: usize) -> Result<f64> {
    match cfg.noise.kind {
        NoiseKind::SubGaussian => lambda_subgaussian(cfg, s_t, t),
        NoiseKind::SubExponential => lambda_subexponential(cfg, s_t, t),
    }
}

/// Score matrix `∇Φ_t(Θ*)` assembled from a log.
pub fn score_matrix(
    theta_star: &Matrix,
    log: &ObservationLog,
    model: &ModelSpec,
) -> Result<Matrix> {
    let mut acc = ScoreAccumulator::new(theta_star.clone(), model.clone())?;
    for (idx, y) in log.iter() {
        acc.push(idx, y)?;
    }
    acc.score()
}

/// `λ_t ≥ 2 ‖∇Φ_t(Θ*)‖_op` for the observations in `log`.
pub fn good_event_holds(
    theta_star: &Matrix,
    log: &ObservationLog,
    model: &ModelSpec,
    lambda_t: f64,
) -> Result<bool> {
    if log.is_empty() {
        return Err(Error::NoObservations);
    }
    let score = score_matrix(theta_star, log, model)?;
    Ok(lambda_t >= 2.0 * matrix_norm(&score, NormKind::Operator)?)
}

/// Streaming version of the score matrix: keeps the unnormalized residual
/// sums so the good event can be checked at every step.
#[derive(Clone, Debug)]
pub struct ScoreAccumulator {
    theta_star: Matrix,
    model: ModelSpec,
    residual_sums: Matrix,
    t: usize,
}

impl ScoreAccumulator {
    pub fn new(theta_star: Matrix, model: ModelSpec) -> Result<Self> {
        for &v in theta_star.as_slice() {
            model.check_domain(v)?;
        }
        let (d1, d2) = theta_star.shape();
        Ok(ScoreAccumulator {
            theta_star,
            model,
            residual_sums: Matrix::zeros(d1, d2),
            t: 0,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn push(&mut self, (row, col): EntryIndex, y: f64) -> Result<()> {
        let (d1, d2) = self.theta_star.shape();
        if row >= d1 || col >= d2 {
            return Err(Error::IndexOutOfRange {
                row,
                col,
                rows: d1,
                cols: d2,
            });
        }
        let mean = self.model.family().mean(self.theta_star[(row, col)]);
        self.residual_sums[(row, col)] += mean - y;
        self.t += 1;
        Ok(())
    }

    pub fn score(&self) -> Result<Matrix> {
        if self.t == 0 {
            return Err(Error::NoObservations);
        }
        Ok(self.residual_sums.scale(1.0 / self.t as f64))
    }

    /// `‖∇Φ_t(Θ*)‖_op`.
    pub fn score_norm(&self) -> Result<f64> {
        if self.t == 0 {
            return Err(Error::NoObservations);
        }
        Ok(matrix_norm(&self.residual_sums, NormKind::Operator)? / self.t as f64)
    }

    pub fn holds(&self, lambda_t: f64) -> Result<bool> {
        Ok(lambda_t >= 2.0 * self.score_norm()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FamilyParams;

    fn sg(sigma: f64) -> BoundConfig {
        BoundConfig::new(0.01, 5, 5, NoiseClass::sub_gaussian(sigma).unwrap()).unwrap()
    }

    fn se(lambda: f64) -> BoundConfig {
        BoundConfig::new(0.01, 5, 5, NoiseClass::sub_exponential(lambda).unwrap()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn subgaussian_schedule_examples() {
        let c = sg(1.0);
        assert!(
            rel(
                lambda_subgaussian(&c, 0.2, 100).unwrap(),
                0.9403152001907199
            ) < 1e-12
        );
        assert!(rel(lambda_subgaussian(&c, 1.0, 1).unwrap(), 21.02608707902773) < 1e-12);
        let ratio =
            lambda_subgaussian(&c, 0.3, 50).unwrap() / lambda_subgaussian(&c, 0.3, 200).unwrap();
        assert!((ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn subexponential_schedule_examples() {
        let c = se(1.0);
        assert!(
            rel(
                lambda_subexponential(&c, 0.2, 100).unwrap(),
                8.957613735055745
            ) < 1e-12
        );
        let l = c.log_term();
        let t = 1e6;
        let second = l / t;
        let first = (0.2 * l / t).sqrt();
        assert!(second / first < 0.01);
        let doubled = lambda_subexponential(&se(2.0), 0.2, 100).unwrap();
        assert!(rel(doubled, 2.0 * 8.957613735055745) < 1e-12);
    }

    #[test]
    fn schedules_reject_bad_input() {
        assert!(matches!(
            lambda_subgaussian(&se(1.0), 0.2, 10),
            Err(Error::WrongNoiseKind { .. })
        ));
        assert!(lambda_subexponential(&sg(1.0), 0.2, 10).is_err());
        assert!(matches!(
            lambda_subgaussian(&sg(1.0), 0.2, 0),
            Err(Error::NoObservations)
        ));
        assert!(lambda_subgaussian(&sg(1.0), 0.0, 3).is_err());
        assert!(BoundConfig::new(1.0, 5, 5, NoiseClass::sub_gaussian(1.0).unwrap()).is_err());
        assert!(lambda_schedule(&se(1.0), 0.2, 100).unwrap() > 0.0);
    }

    fn gaussian() -> ModelSpec {
        ModelSpec::from_name("gaussian", &FamilyParams::default(), 10.0).unwrap()
    }

    #[test]
    fn zero_noise_makes_score_vanish() {
        let model = gaussian();
        let theta = Matrix::from_fn(3, 3, |i, j| (i + 2 * j) as f64 * 0.5);
        let mut log = ObservationLog::new(3, 3);
        for k in 0..20 {
            let idx = (k % 3, (k / 3) % 3);
            log.push(idx, model.family().mean(theta[idx])).unwrap();
        }
        assert_eq!(
            score_matrix(&theta, &log, &model).unwrap().frobenius_norm(),
            0.0
        );
        assert!(good_event_holds(&theta, &log, &model, 1e-12).unwrap());
    }

    #[test]
    fn single_observation_threshold() {
        let model = gaussian();
        let theta = Matrix::zeros(2, 2);
        let mut log = ObservationLog::new(2, 2);
        log.push((0, 0), 3.0).unwrap();
        let score = score_matrix(&theta, &log, &model).unwrap();
        assert_eq!(score[(0, 0)], -3.0);
        assert!(good_event_holds(&theta, &log, &model, 6.0).unwrap());
        assert!(!good_event_holds(&theta, &log, &model, 5.999).unwrap());
        assert!(good_event_holds(&theta, &ObservationLog::new(2, 2), &model, 1.0).is_err());
    }

    #[test]
    fn accumulator_matches_batch_score() {
        let model = gaussian();
        let theta = Matrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64 * 0.1);
        let mut log = ObservationLog::new(2, 3);
        let mut acc = ScoreAccumulator::new(theta.clone(), model.clone()).unwrap();
        for k in 0..17 {
            let idx = (k % 2, k % 3);
            let y = (k as f64 * 0.37).sin();
            log.push(idx, y).unwrap();
            acc.push(idx, y).unwrap();
        }
        let batch = score_matrix(&theta, &log, &model).unwrap();
        assert!(acc.score().unwrap().sub(&batch).frobenius_norm() < 1e-15);
        let op = matrix_norm(&batch, NormKind::Operator).unwrap();
        assert!((acc.score_norm().unwrap() - op).abs() < 1e-12);
    }
}

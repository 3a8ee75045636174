//! Nuclear-norm penalized, box-constrained maximum likelihood.
//!
//! The loss is `Φ_t(Θ) = (1/t) Σ [G(Θ[π_i]) - Θ[π_i] y_i]` and the estimator
//! minimizes `Φ_t(Θ) + λ_t ‖Θ‖_nuc` over the box. [`fit`] runs projected
//! proximal gradient: gradient step, singular value soft-thresholding with
//! `τ = step · λ_t`, then clipping to the box. The step halves whenever the
//! penalized objective would increase and doubles again, up to its initial
//! value, at the start of the next iteration.
//!
//! Inside the iteration the log is reduced to per-entry counts and response
//! sums ([`SufficientStats`]), so one evaluation costs `O(d1 d2)` regardless
//! of `t`.

use serde::{Deserialize, Serialize};

use crate::linalg::{matrix_norm, soft_threshold_with_nuclear, Matrix, NormKind};
use crate::models::ModelSpec;
use crate::stream::{EntryIndex, ObservationLog};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Initial step. `None` uses `1 / (u_γ · max_kl p_t(k, l))`, the inverse
    /// Lipschitz constant of `∇Φ_t` on the box.
    pub step_size: Option<f64>,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step_size: None,
            max_iters: 500,
            rel_tol: 1e-8,
            warm_start: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(step) = self.step_size {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::param(format!(
                    "step size must be positive, got {step}"
                )));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters must be at least 1"));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::param(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Per-entry observation counts and response sums.
#[derive(Clone, Debug, PartialEq)]
pub struct SufficientStats {
    d1: usize,
    d2: usize,
    t: usize,
    counts: Vec<f64>,
    sums: Vec<f64>,
}

impl SufficientStats {
    pub fn new(d1: usize, d2: usize) -> Self {
        SufficientStats {
            d1,
            d2,
            t: 0,
            counts: vec![0.0; d1 * d2],
            sums: vec![0.0; d1 * d2],
        }
    }

    pub fn from_log(log: &ObservationLog) -> Result<Self> {
        let (d1, d2) = log.shape();
        let mut s = SufficientStats::new(d1, d2);
        for (idx, y) in log.iter() {
            s.push(idx, y)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, (row, col): EntryIndex, y: f64) -> Result<()> {
        if row >= self.d1 || col >= self.d2 {
            return Err(Error::IndexOutOfRange {
                row,
                col,
                rows: self.d1,
                cols: self.d2,
            });
        }
        let k = row * self.d2 + col;
        self.counts[k] += 1.0;
        self.sums[k] += y;
        self.t += 1;
        Ok(())
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    fn check(&self, theta: &Matrix) -> Result<()> {
        if self.t == 0 {
            return Err(Error::NoObservations);
        }
        if theta.shape() != (self.d1, self.d2) {
            return Err(Error::param(format!(
                "parameter shape {:?} does not match observations {:?}",
                theta.shape(),
                (self.d1, self.d2)
            )));
        }
        Ok(())
    }

    fn check_observed_domain(&self, theta: &Matrix, model: &ModelSpec) -> Result<()> {
        for (k, &v) in theta.as_slice().iter().enumerate() {
            if self.counts[k] > 0.0 {
                model.check_domain(v)?;
            }
        }
        Ok(())
    }

    /// `Φ_t(Θ)`.
    pub fn loss(&self, theta: &Matrix, model: &ModelSpec) -> Result<f64> {
        self.check(theta)?;
        self.check_observed_domain(theta, model)?;
        Ok(self.loss_unchecked(theta, model))
    }

    fn loss_unchecked(&self, theta: &Matrix, model: &ModelSpec) -> f64 {
        let family = model.family();
        let total: f64 = theta
            .as_slice()
            .iter()
            .zip(self.counts.iter().zip(&self.sums))
            .filter(|(_, (&n, _))| n > 0.0)
            .map(|(&x, (&n, &s))| n * family.log_partition(x) - x * s)
            .sum();
        total / self.t as f64
    }

    /// `∇Φ_t(Θ)`; zero at never-observed entries.
    pub fn gradient(&self, theta: &Matrix, model: &ModelSpec) -> Result<Matrix> {
        self.check(theta)?;
        self.check_observed_domain(theta, model)?;
        Ok(self.gradient_unchecked(theta, model))
    }

    fn gradient_unchecked(&self, theta: &Matrix, model: &ModelSpec) -> Matrix {
        let family = model.family();
        let inv_t = 1.0 / self.t as f64;
        let mut g = Matrix::zeros(self.d1, self.d2);
        for (k, out) in g.as_mut_slice().iter_mut().enumerate() {
            let n = self.counts[k];
            if n > 0.0 {
                *out = (n * family.mean(theta.as_slice()[k]) - self.sums[k]) * inv_t;
            }
        }
        g
    }

    /// Largest per-entry empirical frequency.
    pub fn max_frequency(&self) -> Result<f64> {
        if self.t == 0 {
            return Err(Error::NoObservations);
        }
        let max = self.counts.iter().copied().fold(0.0, f64::max);
        Ok(max / self.t as f64)
    }
}

/// `Φ_t(Θ) = (1/t) Σ [G(Θ[π_i]) - Θ[π_i] y_i]`.
pub fn loss(theta: &Matrix, log: &ObservationLog, model: &ModelSpec) -> Result<f64> {
    SufficientStats::from_log(log)?.loss(theta, model)
}

/// `∇Φ_t(Θ) = (1/t) Σ (G'(Θ[π_i]) - y_i) E_{π_i}`.
pub fn gradient(theta: &Matrix, log: &ObservationLog, model: &ModelSpec) -> Result<Matrix> {
    SufficientStats::from_log(log)?.gradient(theta, model)
}

/// `B_{Φ_t}(Θ, Θ_ref) = (1/t) Σ B_G(Θ[π_i], Θ_ref[π_i])`, which equals
/// `Φ_t(Θ) - Φ_t(Θ_ref) - ⟨∇Φ_t(Θ_ref), Θ - Θ_ref⟩`.
pub fn bregman(
    theta: &Matrix,
    theta_ref: &Matrix,
    log: &ObservationLog,
    model: &ModelSpec,
) -> Result<f64> {
    if log.is_empty() {
        return Err(Error::NoObservations);
    }
    if theta.shape() != log.shape() || theta_ref.shape() != log.shape() {
        return Err(Error::param("parameter shape does not match observations"));
    }
    let family = model.family();
    let mut total = 0.0;
    for (idx, _) in log.iter() {
        let (x, y) = (theta[idx], theta_ref[idx]);
        model.check_domain(x)?;
        model.check_domain(y)?;
        total += family.bregman(x, y);
    }
    Ok(total / log.len() as f64)
}

/// Outcome of [`fit`].
#[derive(Clone, Debug)]
pub struct FitReport {
    pub theta: Matrix,
    /// Penalized objective at `theta`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Step in use when the iteration stopped.
    pub step: f64,
}

fn clip_to(m: &Matrix, (lo, hi): (f64, f64)) -> (Matrix, bool) {
    let mut out = m.clone();
    let mut changed = false;
    for v in out.as_mut_slice() {
        let c = v.clamp(lo, hi);
        changed |= c != *v;
        *v = c;
    }
    (out, changed)
}

/// One proximal-gradient map `Θ ↦ box(SVT(Θ - step ∇Φ_t(Θ), step λ))`.
pub fn prox_step(
    theta: &Matrix,
    stats: &SufficientStats,
    lambda_t: f64,
    model: &ModelSpec,
    step: f64,
) -> Result<Matrix> {
    let grad = stats.gradient(theta, model)?;
    let (shrunk, _) =
        soft_threshold_with_nuclear(&theta.add_scaled(-step, &grad), step * lambda_t)?;
    Ok(clip_to(&shrunk, model.parameter_interval()).0)
}

/// Minimize `Φ_t(Θ) + λ_t ‖Θ‖_nuc` over the box, starting at `init`.
pub fn fit(
    log: &ObservationLog,
    lambda_t: f64,
    model: &ModelSpec,
    cfg: &SolverConfig,
    init: &Matrix,
) -> Result<FitReport> {
    fit_stats(&SufficientStats::from_log(log)?, lambda_t, model, cfg, init)
}

/// [`fit`] on precomputed sufficient statistics.
pub fn fit_stats(
    stats: &SufficientStats,
    lambda_t: f64,
    model: &ModelSpec,
    cfg: &SolverConfig,
    init: &Matrix,
) -> Result<FitReport> {
    cfg.validate()?;
    stats.check(init)?;
    if !(lambda_t > 0.0 && lambda_t.is_finite()) {
        return Err(Error::param(format!(
            "lambda_t must be positive, got {lambda_t}"
        )));
    }
    let interval = model.parameter_interval();
    if init
        .as_slice()
        .iter()
        .any(|&v| v < interval.0 || v > interval.1)
    {
        return Err(Error::param("initial point lies outside the box"));
    }
    let (_, u_gamma) = model.curvature_bounds();
    let initial_step = match cfg.step_size {
        Some(step) => step,
        None => 1.0 / (u_gamma * stats.max_frequency()?),
    };
    let min_step = 1e-12 * initial_step;

    let mut theta = init.clone();
    let mut objective =
        stats.loss_unchecked(&theta, model) + lambda_t * matrix_norm(&theta, NormKind::Nuclear)?;
    let mut step = initial_step;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        // the clip can reject a step that plain SVT would accept; let the step
        // recover so one rejection does not slow every later iteration
        step = (2.0 * step).min(initial_step);
        let grad = stats.gradient_unchecked(&theta, model);
        let (candidate, cand_objective) = loop {
            let (shrunk, shrunk_nuclear) =
                soft_threshold_with_nuclear(&theta.add_scaled(-step, &grad), step * lambda_t)?;
            let (clipped, changed) = clip_to(&shrunk, interval);
            let nuclear = if changed {
                matrix_norm(&clipped, NormKind::Nuclear)?
            } else {
                shrunk_nuclear
            };
            let obj = stats.loss_unchecked(&clipped, model) + lambda_t * nuclear;
            if obj <= objective {
                break (Some(clipped), obj);
            }
            // an increase at roundoff level only ends the fit if the map has
            // also stopped moving
            if obj - objective <= 1e-14 * objective.abs().max(1.0)
                && clipped.sub(&theta).frobenius_norm()
                    <= cfg.rel_tol * theta.frobenius_norm().max(1.0)
            {
                break (None, objective);
            }
            step *= 0.5;
            if step < min_step {
                return Err(Error::StepUnderflow {
                    iteration: iterations,
                    step,
                });
            }
        };
        let Some(candidate) = candidate else {
            converged = true;
            break;
        };
        let moved = candidate.sub(&theta).frobenius_norm();
        let decrease = (objective - cand_objective) / objective.abs().max(1.0);
        theta = candidate;
        objective = cand_objective;
        if decrease < cfg.rel_tol && moved <= cfg.rel_tol * theta.frobenius_norm().max(1.0) {
            converged = true;
            break;
        }
    }

    Ok(FitReport {
        theta,
        objective,
        iterations,
        converged,
        step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FamilyParams;
    use crate::rng::master_rng;
    use crate::stream::{generate_target, next_index};
    use rand::Rng;

    fn model(name: &str, gamma: f64) -> ModelSpec {
        ModelSpec::from_name(name, &FamilyParams::default(), gamma).unwrap()
    }

    fn one_obs(d: usize, idx: EntryIndex, y: f64) -> ObservationLog {
        let mut log = ObservationLog::new(d, d);
        log.push(idx, y).unwrap();
        log
    }

    #[test]
    fn loss_examples() {
        let g = model("gaussian", 10.0);
        let log = one_obs(2, (0, 0), 3.0);
        assert_eq!(loss(&Matrix::zeros(2, 2), &log, &g).unwrap(), 0.0);

        let p = model("poisson", 1.0);
        let log = one_obs(2, (0, 0), 2.0);
        assert_eq!(loss(&Matrix::zeros(2, 2), &log, &p).unwrap(), 1.0);

        let theta = Matrix::from_fn(3, 3, |i, j| (i + j) as f64 * 0.3 - 0.4);
        let mut log = ObservationLog::new(3, 3);
        let mut expected = 0.0;
        for k in 0..12 {
            let idx = (k % 3, (k * 2) % 3);
            log.push(idx, theta[idx]).unwrap();
            expected -= theta[idx] * theta[idx] / 2.0;
        }
        let value = loss(&theta, &log, &model("gaussian", 10.0)).unwrap();
        assert!((value - expected / 12.0).abs() < 1e-14);
        assert!(value <= 0.0);
    }

    #[test]
    fn gradient_examples() {
        let g = model("gaussian", 10.0);
        let log = one_obs(3, (0, 0), 3.0);
        let grad = gradient(&Matrix::zeros(3, 3), &log, &g).unwrap();
        let mut expected = Matrix::zeros(3, 3);
        expected[(0, 0)] = -3.0;
        assert_eq!(grad, expected);

        let theta = Matrix::from_fn(2, 2, |i, j| 0.2 * i as f64 - 0.1 * j as f64);
        let mut log = ObservationLog::new(2, 2);
        for k in 0..7 {
            let idx = (k % 2, (k / 2) % 2);
            log.push(idx, g.family().mean(theta[idx])).unwrap();
        }
        assert_eq!(gradient(&theta, &log, &g).unwrap().frobenius_norm(), 0.0);
        assert!(loss(&theta, &ObservationLog::new(2, 2), &g).is_err());
    }

    #[test]
    fn bregman_examples() {
        let g = model("gaussian", 10.0);
        let log = one_obs(2, (0, 0), 0.0);
        let a = Matrix::zeros(2, 2);
        let mut b = Matrix::zeros(2, 2);
        b[(0, 0)] = 2.0;
        assert_eq!(bregman(&b, &b, &log, &g).unwrap(), 0.0);
        assert_eq!(bregman(&b, &a, &log, &g).unwrap(), 2.0);
    }

    #[test]
    fn bregman_matches_its_definition() {
        let mut rng = master_rng(4);
        for name in ["gaussian", "binomial", "poisson"] {
            let m = model(name, 1.0);
            let mut log = ObservationLog::new(3, 4);
            for _ in 0..30 {
                log.push(next_index(3, 4, &mut rng), rng.random::<f64>())
                    .unwrap();
            }
            let a = Matrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0));
            let b = Matrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0));
            let direct = loss(&a, &log, &m).unwrap()
                - loss(&b, &log, &m).unwrap()
                - gradient(&b, &log, &m).unwrap().inner(&a.sub(&b));
            let value = bregman(&a, &b, &log, &m).unwrap();
            assert!(
                (value - direct).abs() < 1e-12,
                "{name}: {value} vs {direct}"
            );
        }
    }

    #[test]
    fn huge_penalty_gives_zero() {
        let g = model("gaussian", 10.0);
        let mut rng = master_rng(1);
        let target = generate_target(5, 5, 1, 10.0, &mut rng).unwrap();
        let log = ObservationLog::simulate(&target, &g, 200, &mut rng).unwrap();
        let init = Matrix::zeros(5, 5);
        let report = fit(&log, 1e6, &g, &SolverConfig::default(), &init).unwrap();
        assert!(report.theta.frobenius_norm() <= 1e-6);

        let init = target.theta_star.clone();
        let report = fit(&log, 1e6, &g, &SolverConfig::default(), &init).unwrap();
        assert!(report.theta.frobenius_norm() <= 1e-6);
    }

    #[test]
    fn noiseless_full_coverage_recovers_target() {
        let g = model("gaussian", 10.0);
        let mut rng = master_rng(2);
        let target = generate_target(5, 5, 1, 10.0, &mut rng).unwrap();
        let mut log = ObservationLog::new(5, 5);
        for i in 0..5 {
            for j in 0..5 {
                log.push((i, j), g.family().mean(target.theta_star[(i, j)]))
                    .unwrap();
            }
        }
        let cfg = SolverConfig {
            max_iters: 5000,
            ..SolverConfig::default()
        };
        let report = fit(&log, 1e-6, &g, &cfg, &Matrix::zeros(5, 5)).unwrap();
        assert!(report.theta.sub(&target.theta_star).frobenius_norm() <= 1e-3);
    }

    #[test]
    fn single_iteration_does_not_increase_objective() {
        let mut rng = master_rng(3);
        for name in ["gaussian", "binomial", "poisson"] {
            let m = model(name, 1.0);
            let target = generate_target(4, 4, 2, 1.0, &mut rng).unwrap();
            let log = ObservationLog::simulate(&target, &m, 40, &mut rng).unwrap();
            let init = Matrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
            let start = loss(&init, &log, &m).unwrap()
                + 0.1 * matrix_norm(&init, NormKind::Nuclear).unwrap();
            let cfg = SolverConfig {
                max_iters: 1,
                ..SolverConfig::default()
            };
            let report = fit(&log, 0.1, &m, &cfg, &init).unwrap();
            assert!(report.objective <= start);
            assert!(report.theta.max_norm() <= 1.0);
        }
    }

    #[test]
    fn fit_rejects_bad_input() {
        let g = model("gaussian", 1.0);
        let log = one_obs(2, (0, 0), 1.0);
        let cfg = SolverConfig::default();
        assert!(fit(&log, 0.0, &g, &cfg, &Matrix::zeros(2, 2)).is_err());
        let outside = Matrix::from_fn(2, 2, |_, _| 2.0);
        assert!(fit(&log, 0.1, &g, &cfg, &outside).is_err());
        let bad = SolverConfig {
            rel_tol: 0.0,
            ..cfg
        };
        assert!(fit(&log, 0.1, &g, &bad, &Matrix::zeros(2, 2)).is_err());
    }
}

//! The always-valid risk-bound process and its fixed-time comparators.
//!
//! With `L = ln((d1 + d2)/α)`, the always-valid bound at time `t` is
//! `6√r λ_t / (p̄_t l_γ)` where `λ_t` is the anytime schedule from
//! [`crate::regularization`]. Written out:
//!
//! - sub-Gaussian: `48σ√r / (p̄_t l_γ) · √(S_t L / t)`
//! - sub-exponential: `288λ√r / (p̄_t l_γ) · (√(S_t L / t) + L / t)`
//!
//! The bound is `+∞` while some entry has never been observed (`p̄_t = 0`).
//!
//! The checkpoint comparator spends `α/f` at each of `f` evenly spaced times
//! and uses a fixed-time matrix Bernstein tail in place of the anytime one:
//!
//! - sub-Gaussian: `λ_fixed = √(8σ² S_t L_f / t)`
//! - sub-exponential: `λ_fixed = 2√2 λ √(S_t L_f / t) + 4λ L_f / t`
//!
//! with `L_f = ln((d1 + d2) f / α)`, then the same `6√r / (p̄_t l_γ)` factor.

use rand::Rng;
use serde::Serialize;

use crate::models::NoiseKind;
use crate::regularization::{lambda_schedule, BoundConfig};
use crate::stats::SummaryStats;
use crate::stream::next_index;
use crate::{Error, Result};

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be positive, got {v}")))
    }
}

fn check_common(r: usize, pbar_t: f64, l_gamma: f64, t: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::param("rank must be at least 1"));
    }
    if !(0.0..=1.0).contains(&pbar_t) {
        return Err(Error::param(format!(
            "pbar_t must lie in [0, 1], got {pbar_t}"
        )));
    }
    positive("l_gamma", l_gamma)?;
    if t == 0 {
        return Err(Error::NoObservations);
    }
    Ok(())
}

/// `6√r λ / (p̄_t l_γ)`, infinite when `p̄_t = 0`.
pub fn bound_from_lambda(lambda: f64, r: usize, pbar_t: f64, l_gamma: f64) -> f64 {
    if pbar_t == 0.0 {
        return f64::INFINITY;
    }
    6.0 * (r as f64).sqrt() * lambda / (pbar_t * l_gamma)
}

#[allow(clippy::too_many_arguments)]
pub fn risk_bound_subgaussian(
    sigma: f64,
    r: usize,
    pbar_t: f64,
    l_gamma: f64,
    s_t: f64,
    d1: usize,
    d2: usize,
    alpha: f64,
    t: usize,
) -> Result<f64> {
    check_common(r, pbar_t, l_gamma, t)?;
    let cfg = BoundConfig::new(alpha, d1, d2, crate::NoiseClass::sub_gaussian(sigma)?)?;
    let lambda_t = lambda_schedule(&cfg, s_t, t)?;
    Ok(bound_from_lambda(lambda_t, r, pbar_t, l_gamma))
}

#[allow(clippy::too_many_arguments)]
pub fn risk_bound_subexponential(
    lambda_se: f64,
    r: usize,
    pbar_t: f64,
    l_gamma: f64,
    s_t: f64,
    d1: usize,
    d2: usize,
    alpha: f64,
    t: usize,
) -> Result<f64> {
    check_common(r, pbar_t, l_gamma, t)?;
    let cfg = BoundConfig::new(
        alpha,
        d1,
        d2,
        crate::NoiseClass::sub_exponential(lambda_se)?,
    )?;
    let lambda_t = lambda_schedule(&cfg, s_t, t)?;
    Ok(bound_from_lambda(lambda_t, r, pbar_t, l_gamma))
}

/// Always-valid bound for the noise class in `cfg`.
pub fn risk_bound(
    cfg: &BoundConfig,
    r: usize,
    pbar_t: f64,
    l_gamma: f64,
    s_t: f64,
    t: usize,
) -> Result<f64> {
    check_common(r, pbar_t, l_gamma, t)?;
    Ok(bound_from_lambda(
        lambda_schedule(cfg, s_t, t)?,
        r,
        pbar_t,
        l_gamma,
    ))
}

/// Closed form under uniform-like sampling with `p_t(k, l) ≥ 1/(μ d1 d2)` and
/// marginals at most `ν/(d1 ∧ d2)`:
/// `48 d1 d2 μ σ √r / l_γ · √(ν u_γ² L / ((d1 ∧ d2) t))`.
#[allow(clippy::too_many_arguments)]
pub fn corollary_bound(
    sigma: f64,
    r: usize,
    mu: f64,
    nu: f64,
    l_gamma: f64,
    u_gamma: f64,
    d1: usize,
    d2: usize,
    alpha: f64,
    t: usize,
) -> Result<f64> {
    positive("sigma", sigma)?;
    positive("u_gamma", u_gamma)?;
    if !(mu >= 1.0 && nu >= 1.0) {
        return Err(Error::param(format!(
            "mu and nu must be at least 1, got {mu}, {nu}"
        )));
    }
    check_common(r, 1.0, l_gamma, t)?;
    let cfg = BoundConfig::new(alpha, d1, d2, crate::NoiseClass::sub_gaussian(sigma)?)?;
    let dd = (d1 * d2) as f64;
    let dmin = d1.min(d2) as f64;
    let root = (nu * u_gamma * u_gamma * cfg.log_term() / (dmin * t as f64)).sqrt();
    Ok(48.0 * dd * mu * sigma * (r as f64).sqrt() / l_gamma * root)
}

/// `f` evenly spaced checkpoints `t_j = ⌊j T / f⌋`, `j = 1..=f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CheckpointSchedule {
    horizon: usize,
    count: usize,
}

impl CheckpointSchedule {
    pub fn new(horizon: usize, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::param("checkpoint count must be at least 1"));
        }
        if count > horizon {
            return Err(Error::param(format!(
                "{count} checkpoints do not fit in a horizon of {horizon}"
            )));
        }
        Ok(CheckpointSchedule { horizon, count })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn times(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.count).map(move |j| j * self.horizon / self.count)
    }

    pub fn contains(&self, t: usize) -> bool {
        if t == 0 || t > self.horizon {
            return false;
        }
        // t = ⌊jT/f⌋ for some j iff j = ⌈t f / T⌉ maps back onto t
        let j = (t * self.count).div_ceil(self.horizon);
        j * self.horizon / self.count == t
    }
}

/// Fixed-time regularization level with budget `α/f`.
pub fn fixed_time_lambda(cfg: &BoundConfig, checkpoints: usize, s_t: f64, t: usize) -> Result<f64> {
    if checkpoints == 0 {
        return Err(Error::param("checkpoint count must be at least 1"));
    }
    if t == 0 {
        return Err(Error::NoObservations);
    }
    if !(s_t > 0.0 && s_t <= 1.0) {
        return Err(Error::param(format!("S_t must lie in (0, 1], got {s_t}")));
    }
    let lf = ((cfg.d1 + cfg.d2) as f64 * checkpoints as f64 / cfg.alpha).ln();
    let t = t as f64;
    let p = cfg.noise.parameter;
    Ok(match cfg.noise.kind {
        NoiseKind::SubGaussian => (8.0 * p * p * s_t * lf / t).sqrt(),
        NoiseKind::SubExponential => {
            2.0 * std::f64::consts::SQRT_2 * p * (s_t * lf / t).sqrt() + 4.0 * p * lf / t
        }
    })
}

/// Checkpointed comparator at checkpoint time `t`.
pub fn hoeffding_checkpoint_bound(
    cfg: &BoundConfig,
    schedule: &CheckpointSchedule,
    t: usize,
    r: usize,
    pbar_t: f64,
    l_gamma: f64,
    s_t: f64,
) -> Result<f64> {
    if !schedule.contains(t) {
        return Err(Error::NotCheckpoint {
            t,
            count: schedule.count(),
            horizon: schedule.horizon(),
        });
    }
    check_common(r, pbar_t, l_gamma, t)?;
    let lambda = fixed_time_lambda(cfg, schedule.count(), s_t, t)?;
    Ok(bound_from_lambda(lambda, r, pbar_t, l_gamma))
}

/// `ln f*`, where `f*` is the smallest real checkpoint count at which the
/// fixed-time level reaches the anytime level for the same `(S_t, t)`.
///
/// For sub-Gaussian noise this is `7 L`, independent of `S_t` and `t`.
pub fn crossover_log_checkpoints(cfg: &BoundConfig, s_t: f64, t: usize) -> Result<f64> {
    let target = lambda_schedule(cfg, s_t, t)?;
    let l = cfg.log_term();
    match cfg.noise.kind {
        NoiseKind::SubGaussian => Ok(7.0 * l),
        NoiseKind::SubExponential => {
            // fixed-time level as a function of L_f; increasing, solve by bisection
            let p = cfg.noise.parameter;
            let tt = t as f64;
            let level = |lf: f64| {
                2.0 * std::f64::consts::SQRT_2 * p * (s_t * lf / tt).sqrt() + 4.0 * p * lf / tt
            };
            let (mut lo, mut hi) = (l, 2.0 * l);
            while level(hi) < target {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if level(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(hi - l)
        }
    }
}

/// One step of the bound process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundRecord {
    pub t: usize,
    pub lambda_t: f64,
    pub s_t: f64,
    pub pbar_t: f64,
    pub bound: f64,
}

/// Per-step always-valid bounds along one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RiskBoundTrace {
    records: Vec<BoundRecord>,
}

impl RiskBoundTrace {
    pub fn new() -> Self {
        RiskBoundTrace::default()
    }

    pub fn push(&mut self, record: BoundRecord) {
        self.records.push(record);
    }

    /// Append the record implied by `stats` after its latest update.
    pub fn record(
        &mut self,
        cfg: &BoundConfig,
        stats: &SummaryStats,
        r: usize,
        l_gamma: f64,
    ) -> Result<BoundRecord> {
        let snap = stats.snapshot()?;
        let lambda_t = lambda_schedule(cfg, snap.s_t, snap.t)?;
        let rec = BoundRecord {
            t: snap.t,
            lambda_t,
            s_t: snap.s_t,
            pbar_t: snap.pbar_t,
            bound: bound_from_lambda(lambda_t, r, snap.pbar_t, l_gamma),
        };
        self.records.push(rec);
        Ok(rec)
    }

    pub fn records(&self) -> &[BoundRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn bounds(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.bound)
    }
}

/// Bound process alone (no estimator) along a uniform-policy stream of
/// `horizon` steps.
pub fn simulate_bound_trace(
    cfg: &BoundConfig,
    r: usize,
    l_gamma: f64,
    horizon: usize,
    rng: &mut impl Rng,
) -> Result<RiskBoundTrace> {
    let mut stats = SummaryStats::new(cfg.d1, cfg.d2);
    let mut trace = RiskBoundTrace::new();
    for _ in 0..horizon {
        stats.update(next_index(cfg.d1, cfg.d2, rng))?;
        trace.record(cfg, &stats, r, l_gamma)?;
    }
    Ok(trace)
}

/// Least-squares slope of `ln(bound)` against `ln(t)` over the records with
/// `t ≥ from` and a finite bound.
pub fn log_log_slope(trace: &RiskBoundTrace, from: usize) -> Result<f64> {
    let pts: Vec<(f64, f64)> = trace
        .records()
        .iter()
        .filter(|r| r.t >= from && r.bound.is_finite())
        .map(|r| ((r.t as f64).ln(), r.bound.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::param(
            "need at least two finite bounds to fit a slope",
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// True iff `error_t < bound_t` at every step.
pub fn coverage_check(errors: &[f64], trace: &RiskBoundTrace) -> Result<bool> {
    if errors.len() != trace.len() {
        return Err(Error::LengthMismatch {
            left: errors.len(),
            right: trace.len(),
        });
    }
    Ok(errors.iter().zip(trace.bounds()).all(|(&e, b)| e < b))
}

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::models::{FamilyParams, ModelRegistry, ModelSpec};
use crate::solver::SolverConfig;
use crate::{Error, Result};

/// When the online loop refits the estimator: at every step up to
/// `dense_until`, then whenever `t` reaches `growth` times the last refit
/// time, and always at the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefitCadence {
    pub dense_until: usize,
    pub growth: f64,
}

impl Default for RefitCadence {
    fn default() -> Self {
        RefitCadence {
            dense_until: 50,
            growth: 1.05,
        }
    }
}

impl RefitCadence {
    pub fn is_due(&self, t: usize, last_refit: usize, horizon: usize) -> bool {
        t <= self.dense_until || t == horizon || t as f64 >= self.growth * last_refit as f64
    }
}

/// One online experiment, as read from JSON (snake_case keys, every field
/// optional).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub model: String,
    #[serde(flatten)]
    pub family: FamilyParams,
    pub d1: usize,
    pub d2: usize,
    pub rank: usize,
    /// Target entries are `scale * Uniform(0, 1)`.
    pub scale: f64,
    /// Box bound; defaults to `scale`.
    pub gamma: Option<f64>,
    pub alpha: f64,
    /// Defaults to 2000 for matrices with at most 25 entries, else 5000.
    pub horizon: Option<usize>,
    pub runs: usize,
    pub seed: u64,
    pub checkpoints: Vec<usize>,
    pub refit: RefitCadence,
    pub solver: SolverConfig,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: "gaussian".into(),
            family: FamilyParams::default(),
            d1: 5,
            d2: 5,
            rank: 1,
            scale: 10.0,
            gamma: None,
            alpha: 0.01,
            horizon: None,
            runs: 20,
            seed: 0,
            checkpoints: vec![5, 20, 500],
            refit: RefitCadence::default(),
            solver: SolverConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
            .unwrap_or(if self.d1 * self.d2 <= 25 { 2000 } else { 5000 })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(self.scale)
    }

    pub fn model_spec(&self, registry: &ModelRegistry) -> Result<ModelSpec> {
        let family = registry.build(&self.model, &self.family)?;
        if !family.symmetric_box() {
            return Err(Error::Config(format!(
                "the {} family has no symmetric box and cannot be used in experiments",
                family.name()
            )));
        }
        ModelSpec::new(family, self.gamma())
    }

    pub fn validate(&self) -> Result<()> {
        let horizon = self.horizon();
        if self.d1 == 0 || self.d2 == 0 {
            return Err(Error::Config("d1 and d2 must be positive".into()));
        }
        if self.rank == 0 || self.rank > self.d1.min(self.d2) {
            return Err(Error::Config(format!(
                "rank {} must lie in [1, {}]",
                self.rank,
                self.d1.min(self.d2)
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if self.gamma() < self.scale {
            return Err(Error::Config(format!(
                "gamma {} is below the target scale {}",
                self.gamma(),
                self.scale
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        for &f in &self.checkpoints {
            if f == 0 || f > horizon {
                return Err(Error::Config(format!(
                    "checkpoint count {f} must lie in [1, horizon = {horizon}]"
                )));
            }
        }
        if self.refit.growth.is_nan() || self.refit.growth <= 1.0 {
            return Err(Error::Config(format!(
                "refit growth must exceed 1, got {}",
                self.refit.growth
            )));
        }
        self.solver
            .validate()
            .map_err(|e| Error::Config(format!("solver: {e}")))?;
        self.model_spec(&ModelRegistry::default()).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides_from_json() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{"model": "binomial", "trials": 3, "d1": 10, "d2": 10, "rank": 2, "scale": 1.0}"#,
        )
        .unwrap();
        assert_eq!(cfg.model, "binomial");
        assert_eq!(cfg.family.trials, Some(3));
        assert_eq!(cfg.horizon(), 5000);
        assert_eq!(cfg.gamma(), 1.0);
        assert_eq!(cfg.checkpoints, vec![5, 20, 500]);
        cfg.validate().unwrap();
        assert_eq!(ExperimentConfig::default().horizon(), 2000);
    }

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json_str(&text).unwrap(), cfg);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = ExperimentConfig::default();
        let bad = [
            ExperimentConfig {
                runs: 0,
                ..base.clone()
            },
            ExperimentConfig {
                horizon: Some(0),
                ..base.clone()
            },
            ExperimentConfig {
                horizon: Some(100),
                ..base.clone()
            },
            ExperimentConfig {
                checkpoints: vec![0],
                ..base.clone()
            },
            ExperimentConfig {
                rank: 6,
                ..base.clone()
            },
            ExperimentConfig {
                alpha: 1.5,
                ..base.clone()
            },
            ExperimentConfig {
                gamma: Some(1.0),
                ..base.clone()
            },
            ExperimentConfig {
                model: "exponential".into(),
                ..base.clone()
            },
            ExperimentConfig {
                model: "cauchy".into(),
                ..base.clone()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn refit_cadence() {
        let c = RefitCadence::default();
        assert!(c.is_due(50, 49, 2000));
        assert!(!c.is_due(51, 50, 2000));
        assert!(c.is_due(53, 50, 2000));
        assert!(c.is_due(2000, 1990, 2000));
    }
}

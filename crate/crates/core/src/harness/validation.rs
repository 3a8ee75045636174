use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::concentration::{
    validate_tail, MatrixSource, NoiseSource, TailExperiment, TailPoint, TailReport,
};
use crate::{Error, Result};

/// One simulated martingale and the `(t, w)` points checked against it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationSuite {
    pub name: String,
    pub experiment: TailExperiment,
    pub points: Vec<TailPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationConfig {
    pub trials: usize,
    pub seed: u64,
    pub suites: Vec<ValidationSuite>,
    pub out: PathBuf,
}

fn points(pairs: &[(f64, f64)]) -> Vec<TailPoint> {
    pairs
        .iter()
        .map(|&(threshold, budget)| TailPoint { threshold, budget })
        .collect()
}

impl Default for ValidationConfig {
    /// Six points per noise class, each with a tail between 0.1 and 0.5.
    fn default() -> Self {
        ValidationConfig {
            trials: 10_000,
            seed: 0,
            suites: vec![
                ValidationSuite {
                    name: "sub_gaussian".into(),
                    experiment: TailExperiment {
                        d1: 2,
                        d2: 2,
                        horizon: 60,
                        source: MatrixSource::Elementary,
                        noise: NoiseSource::Gaussian { sigma: 1.0 },
                    },
                    points: points(&[
                        (11.0, 5.0),
                        (12.0, 5.0),
                        (16.0, 10.0),
                        (20.0, 10.0),
                        (25.0, 25.0),
                        (30.0, 25.0),
                    ]),
                },
                ValidationSuite {
                    name: "sub_exponential".into(),
                    experiment: TailExperiment {
                        d1: 2,
                        d2: 2,
                        horizon: 60,
                        source: MatrixSource::RandomBounded { x_max: 1.0 },
                        noise: NoiseSource::CenteredPoisson { mean: 1.0 },
                    },
                    points: points(&[
                        (75.0, 1.0),
                        (100.0, 1.0),
                        (110.0, 5.0),
                        (130.0, 5.0),
                        (160.0, 10.0),
                        (200.0, 10.0),
                    ]),
                },
            ],
            out: PathBuf::from("out"),
        }
    }
}

impl ValidationConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.suites.is_empty() {
            return Err(Error::Config("no validation suites configured".into()));
        }
        for suite in &self.suites {
            suite
                .experiment
                .validate()
                .map_err(|e| Error::Config(format!("suite {}: {e}", suite.name)))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub experiment: TailExperiment,
    pub reports: Vec<TailReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub trials: usize,
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
    /// Every non-vacuous point passed.
    pub all_passed: bool,
}

/// Evaluate every suite; point `j` of suite `i` uses seed `seed + 1000 i + j`.
pub fn validation_report(cfg: &ValidationConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let mut suites = Vec::with_capacity(cfg.suites.len());
    for (i, suite) in cfg.suites.iter().enumerate() {
        let reports = suite
            .points
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let seed = cfg.seed.wrapping_add(1000 * i as u64 + j as u64);
                validate_tail(&suite.experiment, p, cfg.trials, seed)
            })
            .collect::<Result<Vec<_>>>()?;
        suites.push(SuiteReport {
            name: suite.name.clone(),
            experiment: suite.experiment,
            reports,
        });
    }
    let all_passed = suites.iter().flat_map(|s| &s.reports).all(|r| r.passed);
    Ok(ValidationReport {
        trials: cfg.trials,
        seed: cfg.seed,
        suites,
        all_passed,
    })
}

/// Run the validation grid and write `validation.json` into `cfg.out`.
pub fn run_validation(cfg: &ValidationConfig) -> Result<ValidationReport> {
    let report = validation_report(cfg)?;
    std::fs::create_dir_all(&cfg.out).map_err(|source| Error::Io {
        path: cfg.out.clone(),
        source,
    })?;
    let path = cfg.out.join("validation.json");
    let file = std::fs::File::create(&path).map_err(|source| Error::Io { path, source })?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_meaningful_points() {
        let cfg = ValidationConfig::default();
        for suite in &cfg.suites {
            assert!(suite.points.len() >= 6);
            for &p in &suite.points {
                let r = validate_tail(&suite.experiment, p, 1, 0).unwrap();
                assert!(
                    r.theoretical_bound <= 0.5 && r.theoretical_bound >= 0.1,
                    "{}: {:?} -> {}",
                    suite.name,
                    p,
                    r.theoretical_bound
                );
            }
        }
    }

    #[test]
    fn zero_trials_are_rejected() {
        let cfg = ValidationConfig {
            trials: 0,
            ..ValidationConfig::default()
        };
        assert!(matches!(validation_report(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn scalar_grid_with_a_vacuous_point() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ValidationConfig {
            trials: 2000,
            seed: 3,
            suites: vec![ValidationSuite {
                name: "scalar".into(),
                experiment: TailExperiment {
                    d1: 1,
                    d2: 1,
                    horizon: 10,
                    source: MatrixSource::Elementary,
                    noise: NoiseSource::Gaussian { sigma: 1.0 },
                },
                points: points(&[(0.0, 10.0), (4.0, 1.0), (8.0, 5.0), (12.0, 10.0)]),
            }],
            out: dir.path().to_path_buf(),
        };
        let report = run_validation(&cfg).unwrap();
        let reports = &report.suites[0].reports;
        assert!(reports[0].vacuous && reports[0].passed);
        assert!(reports
            .iter()
            .all(|r| r.rate <= r.theoretical_bound + r.slack() || r.vacuous));
        assert!(report.all_passed);
        let json: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("validation.json")).unwrap(),
        )
        .unwrap();
        let first = &json["suites"][0]["reports"][0];
        for key in [
            "tail_params",
            "theoretical_bound",
            "trials",
            "violations",
            "rate",
        ] {
            assert!(!first[key].is_null(), "missing {key}");
        }
    }
}

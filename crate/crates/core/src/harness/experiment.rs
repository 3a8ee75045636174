use std::fs;
use std::io;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::bounds::{bound_from_lambda, fixed_time_lambda, CheckpointSchedule};
use crate::linalg::Matrix;
use crate::models::{ModelRegistry, ModelSpec};
use crate::regularization::{lambda_schedule, BoundConfig, ScoreAccumulator};
use crate::rng::stream_rng;
use crate::solver::{fit_stats, SufficientStats};
use crate::stats::SummaryStats;
use crate::stream::{generate_target, next_index, observe};
use crate::{Error, Result};

/// One row of `trace.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub run: usize,
    pub t: usize,
    pub refit: bool,
    /// `‖Θ̂ - Θ*‖_F` for the latest refit.
    pub frob_error: f64,
    pub lambda_t: f64,
    pub s_t: f64,
    pub pbar_t: f64,
    pub av_bound: f64,
    /// One entry per configured checkpoint count, `None` off its grid.
    pub hoeffding: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub stream: u64,
    /// `frob_error < av_bound` at every refit.
    pub covered: bool,
    pub refits: usize,
    /// Refits that hit `max_iters` before meeting the convergence test.
    pub unconverged_refits: usize,
    pub final_error: Option<f64>,
    pub final_bound: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub model: String,
    pub config: ExperimentConfig,
    pub horizon: usize,
    pub runs: Vec<RunSummary>,
    pub covered_runs: usize,
    pub coverage_rate: f64,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<TraceRow>,
    pub summary: ExperimentSummary,
}

/// Everything one run needs besides its index.
struct RunContext<'a> {
    cfg: &'a ExperimentConfig,
    model: &'a ModelSpec,
    bound_cfg: BoundConfig,
    l_gamma: f64,
    schedules: Vec<CheckpointSchedule>,
    horizon: usize,
}

impl RunContext<'_> {
    fn run(&self, run: usize) -> (Vec<TraceRow>, RunSummary) {
        let mut rows = Vec::with_capacity(self.horizon);
        let mut summary = RunSummary {
            run,
            seed: self.cfg.seed,
            stream: run as u64,
            covered: true,
            refits: 0,
            unconverged_refits: 0,
            final_error: None,
            final_bound: None,
            error: None,
        };
        if let Err(e) = self.simulate(run, &mut rows, &mut summary) {
            summary.covered = false;
            summary.error = Some(e.to_string());
        }
        (rows, summary)
    }

    fn simulate(
        &self,
        run: usize,
        rows: &mut Vec<TraceRow>,
        summary: &mut RunSummary,
    ) -> Result<()> {
        let cfg = self.cfg;
        let (d1, d2) = (cfg.d1, cfg.d2);
        let mut rng = stream_rng(cfg.seed, run as u64);
        let target = generate_target(d1, d2, cfg.rank, cfg.scale, &mut rng)?;
        let mut stats = SummaryStats::new(d1, d2);
        let mut suff = SufficientStats::new(d1, d2);
        let mut theta = Matrix::zeros(d1, d2);
        let mut frob_error = target.theta_star.frobenius_norm();
        let mut last_refit = 0;

        for t in 1..=self.horizon {
            let idx = next_index(d1, d2, &mut rng);
            let y = observe(&target, idx, self.model, &mut rng)?;
            stats.update(idx)?;
            suff.push(idx, y)?;
            let snap = stats.snapshot()?;
            let lambda_t = lambda_schedule(&self.bound_cfg, snap.s_t, t)?;
            let av_bound = bound_from_lambda(lambda_t, cfg.rank, snap.pbar_t, self.l_gamma);

            let refit = cfg.refit.is_due(t, last_refit, self.horizon);
            if refit {
                let init = if cfg.solver.warm_start {
                    theta
                } else {
                    Matrix::zeros(d1, d2)
                };
                let report = fit_stats(&suff, lambda_t, self.model, &cfg.solver, &init)?;
                summary.unconverged_refits += usize::from(!report.converged);
                theta = report.theta;
                frob_error = theta.sub(&target.theta_star).frobenius_norm();
                last_refit = t;
                summary.refits += 1;
                summary.covered &= frob_error < av_bound;
            }

            let hoeffding = self
                .schedules
                .iter()
                .map(|s| {
                    if s.contains(t) {
                        let lambda = fixed_time_lambda(&self.bound_cfg, s.count(), snap.s_t, t)?;
                        Ok(Some(bound_from_lambda(
                            lambda,
                            cfg.rank,
                            snap.pbar_t,
                            self.l_gamma,
                        )))
                    } else {
                        Ok(None)
                    }
                })
                .collect::<Result<Vec<_>>>()?;

            rows.push(TraceRow {
                run,
                t,
                refit,
                frob_error,
                lambda_t,
                s_t: snap.s_t,
                pbar_t: snap.pbar_t,
                av_bound,
                hoeffding,
            });
            summary.final_error = Some(frob_error);
            summary.final_bound = Some(av_bound);
        }
        Ok(())
    }
}

/// Run every configured run in memory. Runs execute in parallel and are
/// merged in run order.
pub fn simulate_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    simulate_experiment_with(cfg, &ModelRegistry::default())
}

pub fn simulate_experiment_with(
    cfg: &ExperimentConfig,
    registry: &ModelRegistry,
) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let model = cfg.model_spec(registry)?;
    let horizon = cfg.horizon();
    let (l_gamma, _) = model.curvature_bounds();
    let ctx = RunContext {
        cfg,
        model: &model,
        bound_cfg: BoundConfig::new(cfg.alpha, cfg.d1, cfg.d2, model.noise_class())?,
        l_gamma,
        schedules: cfg
            .checkpoints
            .iter()
            .map(|&f| CheckpointSchedule::new(horizon, f))
            .collect::<Result<_>>()?,
        horizon,
    };
    let per_run: Vec<(Vec<TraceRow>, RunSummary)> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| ctx.run(run))
        .collect();

    let mut rows = Vec::with_capacity(cfg.runs * horizon);
    let mut runs = Vec::with_capacity(cfg.runs);
    for (r, s) in per_run {
        rows.extend(r);
        runs.push(s);
    }
    let covered_runs = runs.iter().filter(|r| r.covered).count();
    Ok(ExperimentOutput {
        rows,
        summary: ExperimentSummary {
            model: model.name().to_string(),
            config: cfg.clone(),
            horizon,
            coverage_rate: covered_runs as f64 / cfg.runs as f64,
            covered_runs,
            runs,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

/// Frequency of runs in which `λ_t ≥ 2 ‖∇Φ_t(Θ*)‖_op` fails at some `t ≤ T`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoodEventSummary {
    pub model: String,
    pub runs: usize,
    pub horizon: usize,
    pub alpha: f64,
    pub violations: usize,
    pub rate: f64,
    /// First failing time of each violating run.
    pub first_failures: Vec<(usize, usize)>,
}

/// Check the good event along every run of `cfg`, with the same per-run
/// streams as [`simulate_experiment`] but without fitting.
pub fn good_event_coverage(cfg: &ExperimentConfig) -> Result<GoodEventSummary> {
    cfg.validate()?;
    let model = cfg.model_spec(&ModelRegistry::default())?;
    let horizon = cfg.horizon();
    let bound_cfg = BoundConfig::new(cfg.alpha, cfg.d1, cfg.d2, model.noise_class())?;
    let outcomes: Vec<Option<usize>> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| -> Result<Option<usize>> {
            let mut rng = stream_rng(cfg.seed, run as u64);
            let target = generate_target(cfg.d1, cfg.d2, cfg.rank, cfg.scale, &mut rng)?;
            let mut stats = SummaryStats::new(cfg.d1, cfg.d2);
            let mut score = ScoreAccumulator::new(target.theta_star.clone(), model.clone())?;
            for t in 1..=horizon {
                let idx = next_index(cfg.d1, cfg.d2, &mut rng);
                let y = observe(&target, idx, &model, &mut rng)?;
                stats.update(idx)?;
                score.push(idx, y)?;
                let lambda_t = lambda_schedule(&bound_cfg, stats.policy_variation()?, t)?;
                if !score.holds(lambda_t)? {
                    return Ok(Some(t));
                }
            }
            Ok(None)
        })
        .collect::<Result<_>>()?;
    let first_failures: Vec<(usize, usize)> = outcomes
        .iter()
        .enumerate()
        .filter_map(|(run, t)| t.map(|t| (run, t)))
        .collect();
    Ok(GoodEventSummary {
        model: model.name().to_string(),
        runs: cfg.runs,
        horizon,
        alpha: cfg.alpha,
        violations: first_failures.len(),
        rate: first_failures.len() as f64 / cfg.runs as f64,
        first_failures,
    })
}

pub fn trace_header(checkpoints: &[usize]) -> Vec<String> {
    let mut header: Vec<String> = [
        "model",
        "run",
        "t",
        "refit",
        "frob_error",
        "lambda_t",
        "S_t",
        "pbar_t",
        "av_bound",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(checkpoints.iter().map(|f| format!("hoeffding_f{f}")));
    header
}

/// Write the trace as CSV. Infinite bounds are written as `inf`, cells off a
/// checkpoint grid are empty.
pub fn write_trace<W: io::Write>(
    writer: W,
    model: &str,
    checkpoints: &[usize],
    rows: &[TraceRow],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(trace_header(checkpoints))?;
    for row in rows {
        let mut record = vec![
            model.to_string(),
            row.run.to_string(),
            row.t.to_string(),
            u8::from(row.refit).to_string(),
            row.frob_error.to_string(),
            row.lambda_t.to_string(),
            row.s_t.to_string(),
            row.pbar_t.to_string(),
            row.av_bound.to_string(),
        ];
        record.extend(
            row.hoeffding
                .iter()
                .map(|h| h.map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&record)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn create_file(path: &Path) -> Result<io::BufWriter<fs::File>> {
    let file = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(io::BufWriter::new(file))
}

/// Run the experiment and write `trace.csv` and `summary.json` into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    let output = simulate_experiment(cfg)?;
    create_dir(&cfg.out)?;
    write_trace(
        create_file(&cfg.out.join("trace.csv"))?,
        &output.summary.model,
        &cfg.checkpoints,
        &output.rows,
    )?;
    serde_json::to_writer_pretty(create_file(&cfg.out.join("summary.json"))?, &output.summary)?;
    Ok(output.summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(runs: usize, horizon: usize) -> ExperimentConfig {
        ExperimentConfig {
            horizon: Some(horizon),
            runs,
            checkpoints: vec![1, 4],
            ..ExperimentConfig::default()
        }
    }

    fn csv_bytes(out: &ExperimentOutput, cfg: &ExperimentConfig) -> Vec<u8> {
        let mut buf = Vec::new();
        write_trace(&mut buf, &out.summary.model, &cfg.checkpoints, &out.rows).unwrap();
        buf
    }

    #[test]
    fn single_step_trace() {
        let cfg = ExperimentConfig {
            checkpoints: vec![1],
            ..small(1, 1)
        };
        let out = simulate_experiment(&cfg).unwrap();
        assert_eq!(out.rows.len(), 1);
        let text = String::from_utf8(csv_bytes(&out, &cfg)).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "model,run,t,refit,frob_error,lambda_t,S_t,pbar_t,av_bound,hoeffding_f1"
        );
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[0], "gaussian");
        assert_eq!(fields[3], "1");
        assert_eq!(fields[7], "0");
        assert_eq!(fields[8], "inf");
        assert_eq!(fields[9], "inf");
    }

    #[test]
    fn trace_shape_and_blank_cells() {
        let cfg = small(2, 40);
        let out = simulate_experiment(&cfg).unwrap();
        assert_eq!(out.rows.len(), 80);
        assert_eq!(out.summary.runs.len(), 2);
        let on_grid: Vec<_> = out
            .rows
            .iter()
            .filter(|r| r.hoeffding[1].is_some())
            .map(|r| r.t)
            .collect();
        assert_eq!(on_grid, vec![10, 20, 30, 40, 10, 20, 30, 40]);
        assert!(out
            .rows
            .iter()
            .all(|r| r.av_bound.is_finite() == (r.pbar_t > 0.0)));
        let text = String::from_utf8(csv_bytes(&out, &cfg)).unwrap();
        let row_11 = text.lines().nth(11).unwrap();
        assert!(row_11.ends_with(",,"), "{row_11}");
    }

    #[test]
    fn same_seed_gives_identical_bytes() {
        let cfg = small(3, 60);
        let a = csv_bytes(&simulate_experiment(&cfg).unwrap(), &cfg);
        let b = csv_bytes(&simulate_experiment(&cfg).unwrap(), &cfg);
        assert_eq!(a, b);
        let other = ExperimentConfig {
            seed: 1,
            ..cfg.clone()
        };
        assert_ne!(a, csv_bytes(&simulate_experiment(&other).unwrap(), &other));
    }

    #[test]
    fn good_event_summary_counts_runs() {
        let cfg = small(4, 100);
        let summary = good_event_coverage(&cfg).unwrap();
        assert_eq!(summary.runs, 4);
        assert_eq!(summary.violations, summary.first_failures.len());
        assert!(summary.rate <= 1.0);
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            out: dir.path().join("nested"),
            ..small(1, 30)
        };
        let summary = run_experiment(&cfg).unwrap();
        assert_eq!(summary.runs.len(), 1);
        let trace = fs::read_to_string(cfg.out.join("trace.csv")).unwrap();
        assert_eq!(trace.lines().count(), 31);
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(cfg.out.join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(json["runs"][0]["seed"], 0);
        assert!(json["coverage_rate"].is_number());
    }
}

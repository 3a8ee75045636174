//! The data-generating process: low-rank targets, uniform index sampling and
//! noisy observations.
//!
//! Indices are zero-based `(row, col)` pairs everywhere, including the CSV
//! form of [`ObservationLog`].

use std::io;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::linalg::{singular_values, Matrix};
use crate::models::ModelSpec;
use crate::{Error, Result};

pub type EntryIndex = (usize, usize);

/// Ground-truth matrix with its rank bound and box bound.
#[derive(Clone, Debug)]
pub struct TargetMatrix {
    pub theta_star: Matrix,
    pub rank: usize,
    pub gamma: f64,
}

impl TargetMatrix {
    pub fn shape(&self) -> (usize, usize) {
        self.theta_star.shape()
    }

    /// Number of singular values above `rel_tol` times the largest one.
    pub fn numerical_rank(&self, rel_tol: f64) -> Result<usize> {
        let s = singular_values(&self.theta_star)?;
        let cutoff = rel_tol * s[0];
        Ok(s.iter().filter(|&&v| v > cutoff).count())
    }

    pub fn entry(&self, (row, col): EntryIndex) -> Result<f64> {
        let (d1, d2) = self.shape();
        if row >= d1 || col >= d2 {
            return Err(Error::IndexOutOfRange {
                row,
                col,
                rows: d1,
                cols: d2,
            });
        }
        Ok(self.theta_star[(row, col)])
    }
}

/// Draw `rank` base vectors with entries `scale * Uniform(0, 1)` and let
/// every row of the target copy one of them, chosen uniformly.
///
/// The box bound is set to `scale`, which holds by construction.
pub fn generate_target(
    d1: usize,
    d2: usize,
    rank: usize,
    scale: f64,
    rng: &mut impl Rng,
) -> Result<TargetMatrix> {
    if d1 == 0 || d2 == 0 {
        return Err(Error::param("target dimensions must be positive"));
    }
    if rank == 0 || rank > d1.min(d2) {
        return Err(Error::param(format!(
            "rank {rank} must lie in [1, min(d1, d2) = {}]",
            d1.min(d2)
        )));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::param(format!("scale must be positive, got {scale}")));
    }
    let bases: Vec<Vec<f64>> = (0..rank)
        .map(|_| (0..d2).map(|_| scale * rng.random::<f64>()).collect())
        .collect();
    let mut theta_star = Matrix::zeros(d1, d2);
    for i in 0..d1 {
        let base = &bases[rng.random_range(0..rank)];
        for (j, &v) in base.iter().enumerate() {
            theta_star[(i, j)] = v;
        }
    }
    Ok(TargetMatrix {
        theta_star,
        rank,
        gamma: scale,
    })
}

/// Uniform draw over `[d1] x [d2]`, independent of the past.
pub fn next_index(d1: usize, d2: usize, rng: &mut impl Rng) -> EntryIndex {
    (rng.random_range(0..d1), rng.random_range(0..d2))
}

/// Noisy response at `index`: a draw from the model with natural parameter
/// `Θ*[index]`.
pub fn observe(
    target: &TargetMatrix,
    index: EntryIndex,
    model: &ModelSpec,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    model.sample_response(target.entry(index)?, rng)
}

/// Sampled indices and their responses, in arrival order.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationLog {
    d1: usize,
    d2: usize,
    indices: Vec<EntryIndex>,
    responses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LogRecord {
    t: usize,
    row: usize,
    col: usize,
    y: f64,
}

impl ObservationLog {
    pub fn new(d1: usize, d2: usize) -> Self {
        assert!(d1 >= 1 && d2 >= 1, "dimensions must be positive");
        ObservationLog {
            d1,
            d2,
            indices: Vec::new(),
            responses: Vec::new(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn push(&mut self, index: EntryIndex, y: f64) -> Result<()> {
        let (row, col) = index;
        if row >= self.d1 || col >= self.d2 {
            return Err(Error::IndexOutOfRange {
                row,
                col,
                rows: self.d1,
                cols: self.d2,
            });
        }
        self.indices.push(index);
        self.responses.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[EntryIndex] {
        &self.indices
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn iter(&self) -> impl Iterator<Item = (EntryIndex, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.responses.iter().copied())
    }

    /// Simulate `steps` uniform-policy observations of `target`.
    pub fn simulate(
        target: &TargetMatrix,
        model: &ModelSpec,
        steps: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let (d1, d2) = target.shape();
        let mut log = ObservationLog::new(d1, d2);
        for _ in 0..steps {
            let idx = next_index(d1, d2, rng);
            let y = observe(target, idx, model, rng)?;
            log.push(idx, y)?;
        }
        Ok(log)
    }

    /// CSV with header `t,row,col,y`, `t` starting at 1.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (k, ((row, col), y)) in self.iter().enumerate() {
            w.serialize(LogRecord {
                t: k + 1,
                row,
                col,
                y,
            })?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(reader: R, d1: usize, d2: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut log = ObservationLog::new(d1, d2);
        for (k, rec) in r.deserialize::<LogRecord>().enumerate() {
            let rec = rec?;
            if rec.t != k + 1 {
                return Err(Error::Config(format!(
                    "observation log out of order: expected t={}, found t={}",
                    k + 1,
                    rec.t
                )));
            }
            log.push((rec.row, rec.col), rec.y)?;
        }
        Ok(log)
    }
}

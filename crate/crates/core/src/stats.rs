//! Streaming statistics of the sampling policy.
//!
//! `S_t` is defined as the larger operator norm of `(1/t) Σ E Eᵀ` and
//! `(1/t) Σ Eᵀ E`. For elementary matrices `E = e_k e_lᵀ` these sums are the
//! diagonal matrices of row and column frequencies, so `S_t` is the largest
//! row or column marginal frequency. No SVD is needed.

use serde::Serialize;

use crate::stream::EntryIndex;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SummaryStats {
    d1: usize,
    d2: usize,
    t: usize,
    entry_counts: Vec<usize>,
    row_counts: Vec<usize>,
    col_counts: Vec<usize>,
    unobserved: usize,
}

/// `(t, S_t, p̄_t)` at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PolicySnapshot {
    pub t: usize,
    pub s_t: f64,
    pub pbar_t: f64,
}

impl SummaryStats {
    pub fn new(d1: usize, d2: usize) -> Self {
        assert!(d1 >= 1 && d2 >= 1, "dimensions must be positive");
        SummaryStats {
            d1,
            d2,
            t: 0,
            entry_counts: vec![0; d1 * d2],
            row_counts: vec![0; d1],
            col_counts: vec![0; d2],
            unobserved: d1 * d2,
        }
    }

    pub fn from_indices(d1: usize, d2: usize, indices: &[EntryIndex]) -> Result<Self> {
        let mut s = SummaryStats::new(d1, d2);
        for &idx in indices {
            s.update(idx)?;
        }
        Ok(s)
    }

    pub fn update(&mut self, (row, col): EntryIndex) -> Result<()> {
        if row >= self.d1 || col >= self.d2 {
            return Err(Error::IndexOutOfRange {
                row,
                col,
                rows: self.d1,
                cols: self.d2,
            });
        }
        let cell = &mut self.entry_counts[row * self.d2 + col];
        if *cell == 0 {
            self.unobserved -= 1;
        }
        *cell += 1;
        self.row_counts[row] += 1;
        self.col_counts[col] += 1;
        self.t += 1;
        Ok(())
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn entry_count(&self, row: usize, col: usize) -> usize {
        self.entry_counts[row * self.d2 + col]
    }

    pub fn entry_counts(&self) -> &[usize] {
        &self.entry_counts
    }

    pub fn row_counts(&self) -> &[usize] {
        &self.row_counts
    }

    pub fn col_counts(&self) -> &[usize] {
        &self.col_counts
    }

    pub fn fully_observed(&self) -> bool {
        self.unobserved == 0
    }

    /// `p̄_t`: smallest empirical entry frequency, 0 while any entry is unseen.
    pub fn min_frequency(&self) -> Result<f64> {
        if self.t == 0 {
            return Err(Error::NoObservations);
        }
        if self.unobserved > 0 {
            return Ok(0.0);
        }
        let min = *self.entry_counts.iter().min().expect("nonempty grid");
        Ok(min as f64 / self.t as f64)
    }

    /// Largest single-entry frequency; bounds the curvature of the loss.
    pub fn max_frequency(&self) -> Result<f64> {
        if self.t == 0 {
            return Err(Error::NoObservations);
        }
        let max = *self.entry_counts.iter().max().expect("nonempty grid");
        Ok(max as f64 / self.t as f64)
    }

    /// `S_t`: largest row or column marginal frequency.
    pub fn policy_variation(&self) -> Result<f64> {
        if self.t == 0 {
            return Err(Error::NoObservations);
        }
        let max_row = *self.row_counts.iter().max().expect("d1 >= 1");
        let max_col = *self.col_counts.iter().max().expect("d2 >= 1");
        Ok(max_row.max(max_col) as f64 / self.t as f64)
    }

    pub fn snapshot(&self) -> Result<PolicySnapshot> {
        Ok(PolicySnapshot {
            t: self.t,
            s_t: self.policy_variation()?,
            pbar_t: self.min_frequency()?,
        })
    }
}

//! Online low-rank matrix completion with always-valid risk bounds.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense matrices, a one-sided Jacobi SVD, norms, singular value
//!   soft-thresholding, box projection and dilation.
//! - [`models`]: exponential-family observation models behind the
//!   [`models::ExponentialFamily`] trait, looked up by name in a
//!   [`models::ModelRegistry`].
//! - [`stream`]: target generation, uniform index sampling and observations.
//! - [`stats`]: streaming sampling-policy statistics (`p̄_t`, `S_t`).
//! - [`regularization`]: anytime regularization schedules and the good-event check.
//! - [`solver`]: the nuclear-norm penalized, box-constrained likelihood estimator.
//! - [`bounds`]: the always-valid risk-bound process and fixed-time comparators.
//! - [`concentration`]: Monte Carlo validation of the matrix martingale tails.
//! - [`harness`]: seeded experiment runner producing CSV traces and JSON reports.

pub mod bounds;
pub mod concentration;
mod error;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod regularization;
pub mod rng;
pub mod solver;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};
pub use linalg::{Matrix, NormKind};
pub use models::{ExponentialFamily, ModelRegistry, ModelSpec, NoiseClass, NoiseKind};

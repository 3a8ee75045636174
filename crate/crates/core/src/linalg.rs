//! Dense small-matrix primitives.
//!
//! Everything here operates on [`Matrix`], a row-major dense `f64` matrix.
//! The problem sizes this crate targets are tiny (5x5, 10x10), so the SVD is
//! a one-sided Jacobi iteration: simple, and accurate to working precision.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::{Error, Result};

/// Convergence threshold on the normalized column inner product.
const JACOBI_TOL: f64 = 1e-15;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormKind {
    Frobenius,
    Nuclear,
    Operator,
    Max,
}

/// Thin singular value decomposition `M = U diag(s) Vᵀ`.
///
/// `u` is `rows x k`, `v` is `cols x k` with `k = min(rows, cols)`, and the
/// singular values are sorted in nonincreasing order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl Matrix {
    /// Zero matrix. Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Square diagonal matrix.
    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Validating constructor: positive dimensions, matching length, finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite matrix entry {bad}")));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::param("ragged rows"));
        }
        Matrix::from_row_major(rows.len(), ncols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a + s * b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Trace inner product `⟨A, B⟩ = Σ A_ij B_ij`.
    pub fn inner(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm(&self, kind: NormKind) -> Result<f64> {
        matrix_norm(self, kind)
    }

    pub fn svd(&self) -> Result<Svd> {
        svd(self)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        reconstruct_with(&self.u, &self.singular_values, &self.v)
    }
}

fn reconstruct_with(u: &Matrix, s: &[f64], v: &Matrix) -> Matrix {
    Matrix::from_fn(u.rows(), v.rows(), |i, j| {
        s.iter()
            .enumerate()
            .map(|(k, &sk)| u[(i, k)] * sk * v[(j, k)])
            .sum()
    })
}

pub fn matrix_norm(m: &Matrix, kind: NormKind) -> Result<f64> {
    Ok(match kind {
        NormKind::Frobenius => m.frobenius_norm(),
        NormKind::Max => m.max_norm(),
        NormKind::Operator => singular_values(m)?[0],
        NormKind::Nuclear => singular_values(m)?.iter().sum(),
    })
}

pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    Ok(svd(m)?.singular_values)
}

/// Thin SVD by one-sided (Hestenes) Jacobi rotations.
///
/// Fails with [`Error::SvdNoConvergence`] if the rotations have not settled
/// after `10 * max(rows, cols)^2` sweeps.
pub fn svd(m: &Matrix) -> Result<Svd> {
    if m.rows >= m.cols {
        jacobi_tall(m)
    } else {
        let Svd {
            u,
            singular_values,
            v,
        } = jacobi_tall(&m.transpose())?;
        Ok(Svd {
            u: v,
            singular_values,
            v: u,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

fn jacobi_tall(m: &Matrix) -> Result<Svd> {
    let (rows, n) = m.shape();
    debug_assert!(rows >= n);
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let max_sweeps = 10 * rows.max(n).pow(2);
    let tol = JACOBI_TOL.max(rows as f64 * f64::EPSILON);
    // columns below this squared norm are numerically zero; their pairings
    // carry only rounding noise and never settle
    let fro2: f64 = cols.iter().map(|c| dot(c, c)).sum();
    let negligible = fro2 * (rows as f64 * f64::EPSILON).powi(2);
    let mut converged = n == 1;
    for _ in 0..max_sweeps {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0
                    || alpha.min(beta) <= negligible
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                rotate(&mut left[p], &mut right[0], c, s);
                let (left, right) = vcols.split_at_mut(q);
                rotate(&mut left[p], &mut right[0], c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps: max_sweeps });
    }

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let cutoff = negligible.sqrt();
    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut singular_values = Vec::with_capacity(n);
    let mut v = Matrix::zeros(n, n);
    let mut pending = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        singular_values.push(norms[j]);
        for i in 0..n {
            v[(i, k)] = vcols[j][i];
        }
        if norms[j] > cutoff && norms[j] > 0.0 {
            ucols.push(cols[j].iter().map(|x| x / norms[j]).collect());
        } else {
            ucols.push(vec![0.0; rows]);
            pending.push(k);
        }
    }
    complete_orthonormal(&mut ucols, &pending, rows);

    let u = Matrix::from_fn(rows, n, |i, k| ucols[k][i]);
    Ok(Svd {
        u,
        singular_values,
        v,
    })
}

/// Fill the columns listed in `pending` with unit vectors orthogonal to all
/// other columns. Each one is the standard basis vector with the largest
/// residual after two Gram-Schmidt passes; that residual is at least
/// `1/√dim`, so the normalization is well conditioned.
fn complete_orthonormal(cols: &mut [Vec<f64>], pending: &[usize], dim: usize) {
    for &k in pending {
        let residual = |i: usize, cols: &[Vec<f64>]| {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            for _ in 0..2 {
                for (j, col) in cols.iter().enumerate() {
                    if j == k {
                        continue;
                    }
                    let proj = dot(&e, col);
                    for (x, c) in e.iter_mut().zip(col) {
                        *x -= proj * c;
                    }
                }
            }
            e
        };
        let best = (0..dim)
            .map(|i| residual(i, cols))
            .max_by(|a, b| dot(a, a).total_cmp(&dot(b, b)))
            .expect("dim >= 1");
        let norm = dot(&best, &best).sqrt();
        cols[k] = best.into_iter().map(|x| x / norm).collect();
    }
}

/// Proximal operator of `tau * ‖·‖_nuc`: `U diag(max(s - tau, 0)) Vᵀ`.
pub fn singular_value_soft_threshold(m: &Matrix, tau: f64) -> Result<Matrix> {
    Ok(soft_threshold_with_nuclear(m, tau)?.0)
}

/// Same as [`singular_value_soft_threshold`] but also returns the nuclear norm
/// of the result, which falls out of the shrunk spectrum for free.
pub(crate) fn soft_threshold_with_nuclear(m: &Matrix, tau: f64) -> Result<(Matrix, f64)> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::param(format!(
            "threshold must be nonnegative, got {tau}"
        )));
    }
    let Svd {
        u,
        singular_values,
        v,
    } = svd(m)?;
    let shrunk: Vec<f64> = singular_values
        .iter()
        .map(|&s| (s - tau).max(0.0))
        .collect();
    let nuclear = shrunk.iter().sum();
    Ok((reconstruct_with(&u, &shrunk, &v), nuclear))
}

/// Clip every entry to `[-gamma, gamma]`.
pub fn box_project(m: &Matrix, gamma: f64) -> Result<Matrix> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::param(format!(
            "box bound must be positive, got {gamma}"
        )));
    }
    Ok(m.map(|v| v.clamp(-gamma, gamma)))
}

/// Self-adjoint dilation `[[0, X], [Xᵀ, 0]]`.
pub fn dilation(x: &Matrix) -> Matrix {
    let (d1, d2) = x.shape();
    let mut z = Matrix::zeros(d1 + d2, d1 + d2);
    for i in 0..d1 {
        for j in 0..d2 {
            z[(i, d1 + j)] = x[(i, j)];
            z[(d1 + j, i)] = x[(i, j)];
        }
    }
    z
}

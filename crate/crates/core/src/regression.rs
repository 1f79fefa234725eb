//! Incremental ordinary least squares with a maintained inverse Gram matrix
//! and A-optimal (trace-reducing) selection of the next sample to measure.
//!
//! Rows are bias-augmented feature vectors. With `A = (XᵀX)⁻¹`, appending a
//! row `v` changes the trace of `A` by `-vᵀA²v / (1 + vᵀAv)`, so the sample
//! that most reduces the expected parameter error is the one maximizing
//! that gain.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Smallest admissible value of `1 + vᵀAv` in a rank-one update.
pub const UPDATE_FLOOR: f64 = 1e-12;
/// Ridge penalty used when the Gram matrix is singular.
pub const RIDGE_LAMBDA: f64 = 1e-6;
/// Reciprocal condition number below which XᵀX is treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("XᵀX is singular or too ill-conditioned (rcond {rcond:e})")]
    Singular { rcond: f64 },
    #[error("need more than {dim} rows, have {rows}")]
    TooFewRows { rows: usize, dim: usize },
    #[error("noise variance must be non-negative")]
    NegativeVariance,
    #[error("degenerate update: 1 + vᵀAv = {0:e}")]
    Degenerate(f64),
    #[error("inverse Gram matrix not yet defined")]
    Undefined,
    #[error("no candidates to choose from")]
    NoCandidates,
}

fn gram(rows: &[Vec<f64>], dim: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(dim, dim);
    for r in rows {
        let v = DVector::from_column_slice(r);
        g += &v * v.transpose();
    }
    g
}

fn xty(rows: &[Vec<f64>], y: &[f64], dim: usize) -> DVector<f64> {
    let mut out = DVector::zeros(dim);
    for (r, &t) in rows.iter().zip(y) {
        out += DVector::from_column_slice(r) * t;
    }
    out
}

fn check_dims(rows: &[Vec<f64>], dim: usize) -> Result<(), RegressionError> {
    match rows.iter().find(|r| r.len() != dim) {
        Some(r) => Err(RegressionError::Dimension {
            expected: dim,
            found: r.len(),
        }),
        None => Ok(()),
    }
}

/// Inverse of a symmetric positive (semi)definite matrix, refused when its
/// reciprocal condition number is below [`SINGULAR_RCOND`].
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, RegressionError> {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let rcond = if max > 0.0 { min / max } else { 0.0 };
    if !(rcond > SINGULAR_RCOND) {
        return Err(RegressionError::Singular { rcond });
    }
    let inv = m
        .clone()
        .cholesky()
        .ok_or(RegressionError::Singular { rcond })?
        .inverse();
    Ok(symmetrize(inv))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Closed-form least squares `(XᵀX)⁻¹Xᵀy`.
pub fn ols_fit(rows: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>, RegressionError> {
    let dim = rows.first().map(Vec::len).ok_or(RegressionError::TooFewRows { rows: 0, dim: 0 })?;
    check_dims(rows, dim)?;
    if y.len() != rows.len() {
        return Err(RegressionError::Dimension {
            expected: rows.len(),
            found: y.len(),
        });
    }
    if rows.len() < dim {
        return Err(RegressionError::TooFewRows {
            rows: rows.len(),
            dim,
        });
    }
    let a = spd_inverse(&gram(rows, dim))?;
    Ok((a * xty(rows, y, dim)).as_slice().to_vec())
}

/// Ridge solution `(XᵀX + λI)⁻¹Xᵀy`; always defined for λ > 0.
pub fn ridge_fit(rows: &[Vec<f64>], y: &[f64], dim: usize, lambda: f64) -> Result<Vec<f64>, RegressionError> {
    check_dims(rows, dim)?;
    let g = gram(rows, dim) + DMatrix::identity(dim, dim) * lambda;
    let sol = g
        .cholesky()
        .ok_or(RegressionError::Singular { rcond: 0.0 })?
        .solve(&xty(rows, y, dim));
    Ok(sol.as_slice().to_vec())
}

/// Expected squared parameter error `σ²·Tr[A]`.
pub fn expected_param_error(sigma_sq: f64, a: &DMatrix<f64>) -> Result<f64, RegressionError> {
    if sigma_sq < 0.0 {
        return Err(RegressionError::NegativeVariance);
    }
    Ok(sigma_sq * a.trace())
}

/// Reduction of `Tr[A]` from appending `v`: `vᵀA²v / (1 + vᵀAv)`.
pub fn trace_gain(a: &DMatrix<f64>, v: &[f64]) -> f64 {
    let v = DVector::from_column_slice(v);
    let av = a * &v;
    av.dot(&av) / (1.0 + v.dot(&av))
}

/// Index of the candidate with the largest trace gain (ties to the lowest).
pub fn select_sample(a: &DMatrix<f64>, candidates: &[Vec<f64>]) -> Result<usize, RegressionError> {
    if candidates.is_empty() {
        return Err(RegressionError::NoCandidates);
    }
    check_dims(candidates, a.nrows())?;
    let mut best = 0;
    let mut best_gain = f64::NEG_INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        let g = trace_gain(a, c);
        if g > best_gain {
            best = i;
            best_gain = g;
        }
    }
    Ok(best)
}

pub fn predict(theta: &[f64], v: &[f64]) -> Result<f64, RegressionError> {
    if theta.len() != v.len() {
        return Err(RegressionError::Dimension {
            expected: theta.len(),
            found: v.len(),
        });
    }
    Ok(theta.iter().zip(v).map(|(t, x)| t * x).sum())
}

/// Unit eigenvector of a symmetric matrix for its largest eigenvalue.
pub fn top_eigenvector(a: &DMatrix<f64>) -> Vec<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let (i, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &l)| if l > acc.1 { (i, l) } else { acc });
    eig.eigenvectors.column(i).normalize().as_slice().to_vec()
}

/// Among `candidates`, the largest-norm vector that is linearly independent
/// of `rows` (ties to the lowest index). Used before `XᵀX` is invertible.
pub fn cold_start_pick(rows: &[Vec<f64>], candidates: &[Vec<f64>]) -> Option<usize> {
    let basis = orthonormal_basis(rows);
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let v = DVector::from_column_slice(c);
        let norm = v.norm();
        if norm == 0.0 {
            continue;
        }
        let mut resid = v.clone();
        for b in &basis {
            resid -= b * b.dot(&v);
        }
        if resid.norm() <= 1e-9 * norm {
            continue;
        }
        if best.is_none_or(|(_, n)| norm > n) {
            best = Some((i, norm));
        }
    }
    best.map(|(i, _)| i)
}

fn orthonormal_basis(rows: &[Vec<f64>]) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for r in rows {
        let v = DVector::from_column_slice(r);
        let mut resid = v.clone();
        for b in &basis {
            resid -= b * b.dot(&v);
        }
        let n = resid.norm();
        if n > 1e-9 * v.norm().max(f64::MIN_POSITIVE) {
            basis.push(resid / n);
        }
    }
    basis
}

/// Running OLS state: design rows, targets, `A = (XᵀX)⁻¹` once defined,
/// and the fitted coefficients.
#[derive(Debug, Clone)]
pub struct DesignState {
    dim: usize,
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    inverse: Option<DMatrix<f64>>,
    xty: DVector<f64>,
    theta: Option<Vec<f64>>,
    ridge: bool,
}

impl DesignState {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: Vec::new(),
            targets: Vec::new(),
            inverse: None,
            xty: DVector::zeros(dim),
            theta: None,
            ridge: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// `(XᵀX)⁻¹`, defined once the design has full column rank.
    pub fn inverse(&self) -> Option<&DMatrix<f64>> {
        self.inverse.as_ref()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        gram(&self.rows, self.dim)
    }

    /// Current coefficients, if any rows have been added.
    pub fn theta(&self) -> Option<&[f64]> {
        self.theta.as_deref()
    }

    /// True when the last fit had to fall back to ridge regression.
    pub fn used_ridge(&self) -> bool {
        self.ridge
    }

    /// Appends a measured row. Uses the Sherman-Morrison update when `A` is
    /// defined, otherwise tries to form `A` by batch inversion.
    pub fn push(&mut self, v: Vec<f64>, y: f64) -> Result<(), RegressionError> {
        if v.len() != self.dim {
            return Err(RegressionError::Dimension {
                expected: self.dim,
                found: v.len(),
            });
        }
        if self.inverse.is_some() {
            return self.rank_one_update(v, y);
        }
        self.append(v, y);
        if self.rows.len() >= self.dim {
            if let Ok(a) = spd_inverse(&self.gram()) {
                self.inverse = Some(a);
            }
        }
        self.refit();
        Ok(())
    }

    fn append(&mut self, v: Vec<f64>, y: f64) {
        self.xty += DVector::from_column_slice(&v) * y;
        self.rows.push(v);
        self.targets.push(y);
    }

    /// Sherman-Morrison: `A ← A − (Av)(Av)ᵀ / (1 + vᵀAv)`; refits θ.
    pub fn rank_one_update(&mut self, v: Vec<f64>, y: f64) -> Result<(), RegressionError> {
        if v.len() != self.dim {
            return Err(RegressionError::Dimension {
                expected: self.dim,
                found: v.len(),
            });
        }
        let a = self.inverse.as_ref().ok_or(RegressionError::Undefined)?;
        let vv = DVector::from_column_slice(&v);
        let av = a * &vv;
        let denom = 1.0 + vv.dot(&av);
        if !(denom > UPDATE_FLOOR) {
            return Err(RegressionError::Degenerate(denom));
        }
        let next = a - (&av * av.transpose()) / denom;
        self.inverse = Some(symmetrize(next));
        self.append(v, y);
        self.refit();
        Ok(())
    }

    fn refit(&mut self) {
        if let Some(a) = &self.inverse {
            self.theta = Some((a * &self.xty).as_slice().to_vec());
            self.ridge = false;
        } else if !self.rows.is_empty() {
            self.theta = ridge_fit(&self.rows, &self.targets, self.dim, RIDGE_LAMBDA).ok();
            self.ridge = true;
        }
    }

    pub fn predict(&self, v: &[f64]) -> Result<f64, RegressionError> {
        let theta = self.theta.as_ref().ok_or(RegressionError::Undefined)?;
        predict(theta, v)
    }

    /// Residual sum of squares over `n − d`.
    pub fn estimate_noise_variance(&self) -> Result<f64, RegressionError> {
        let n = self.rows.len();
        if n <= self.dim {
            return Err(RegressionError::TooFewRows {
                rows: n,
                dim: self.dim,
            });
        }
        let theta = self.theta.as_ref().ok_or(RegressionError::Undefined)?;
        let rss: f64 = self
            .rows
            .iter()
            .zip(&self.targets)
            .map(|(r, &y)| {
                let e = y - predict(theta, r).unwrap_or(f64::NAN);
                e * e
            })
            .sum();
        Ok(rss / (n - self.dim) as f64)
    }
}

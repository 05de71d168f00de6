//! Cyclic coordinate descent for the lasso on precomputed Gram statistics.

use ndarray::{Array1, ArrayView1, ArrayView2};

use super::linear::{CenteredGram, LinearModel};
use super::RegressError;

pub const DEFAULT_LASSO_TOL: f64 = 1e-7;
pub const DEFAULT_LASSO_MAX_ITER: usize = 10_000;

/// Allowed deviation of a column's sample variance from 1.
const STANDARDIZED_TOL: f64 = 0.1;

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Solves `(1/2n)|y - Xw - b|² + alpha·|w|₁` for any alpha over one design.
pub struct LassoSolver<'a> {
    stats: &'a CenteredGram,
}

impl<'a> LassoSolver<'a> {
    /// Fails unless every column has unit sample variance (within 10%) or is constant.
    pub fn new(stats: &'a CenteredGram) -> Result<Self, RegressError> {
        if stats.n < 2 {
            return Err(RegressError::TooFewRows {
                needed: 2,
                got: stats.n,
            });
        }
        let dof = (stats.n - 1) as f64;
        for (column, g) in stats.gram.diag().iter().enumerate() {
            let variance = g / dof;
            if variance > 1e-20 && (variance - 1.0).abs() > STANDARDIZED_TOL {
                return Err(RegressError::NotStandardized { column, variance });
            }
        }
        Ok(Self { stats })
    }

    pub fn solve(
        &self,
        alpha: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<LinearModel, RegressError> {
        let s = self.stats;
        let p = s.width();
        let inv_n = 1.0 / s.n as f64;
        let diag: Vec<f64> = s.gram.diag().iter().map(|g| g * inv_n).collect();
        // q = Xᵀr / n, kept in sync with w
        let mut q: Vec<f64> = s.xty.iter().map(|v| v * inv_n).collect();
        let mut w = vec![0.0; p];
        let mut max_change = f64::INFINITY;
        let mut sweeps = 0;
        while sweeps < max_iter {
            sweeps += 1;
            max_change = 0.0;
            for j in 0..p {
                if diag[j] <= 0.0 {
                    continue;
                }
                let rho = q[j] + diag[j] * w[j];
                let new = soft_threshold(rho, alpha) / diag[j];
                let delta = new - w[j];
                if delta != 0.0 {
                    w[j] = new;
                    let col = s.gram.column(j);
                    for (qk, g) in q.iter_mut().zip(col.iter()) {
                        *qk -= g * inv_n * delta;
                    }
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < tol {
                let weights = Array1::from(w);
                let intercept = s.y_mean - weights.dot(&s.x_means);
                return Ok(LinearModel {
                    weights: weights.to_vec(),
                    intercept,
                    fallback_alpha: None,
                });
            }
        }
        Err(RegressError::NotConverged {
            iterations: sweeps,
            max_violation: max_change,
        })
    }
}

/// Lasso with an unpenalized intercept. Columns must be standardized.
pub fn fit_lasso(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LinearModel, RegressError> {
    if !(alpha > 0.0) {
        return Err(RegressError::InvalidParameter(format!(
            "lasso alpha must be > 0, got {alpha}"
        )));
    }
    let stats = CenteredGram::new(x, y, true);
    LassoSolver::new(&stats)?.solve(alpha, tol, max_iter)
}

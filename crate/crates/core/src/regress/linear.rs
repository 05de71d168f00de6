use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::RegressError;
use crate::linalg::{center_columns, column_means, gram, Cholesky};

/// Ridge strength used when an ordinary least-squares system is singular.
pub const RANK_FALLBACK_ALPHA: f64 = 1e-10;

/// Pivots below this fraction of the largest Gram diagonal count as rank loss.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Ridge strength actually used when the requested solve was singular.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_alpha: Option<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        let w = ArrayView1::from(&self.weights[..]);
        x.dot(&w) + self.intercept
    }
}

/// Sufficient statistics of a least-squares problem: column means, the
/// (centered) Gram matrix and `Xᵀy`.
///
/// One instance serves every ridge strength and the lasso solver.
#[derive(Debug, Clone)]
pub struct CenteredGram {
    pub n: usize,
    pub x_means: Array1<f64>,
    pub y_mean: f64,
    pub gram: Array2<f64>,
    pub xty: Array1<f64>,
    max_diag: f64,
}

impl CenteredGram {
    pub fn new(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, fit_intercept: bool) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        let (x_means, y_mean) = if fit_intercept {
            (column_means(x), y.sum() / n.max(1) as f64)
        } else {
            (Array1::zeros(p), 0.0)
        };
        let xc = center_columns(x, x_means.view());
        let yc = &y - y_mean;
        let gram = gram(xc.view());
        let xty = xc.t().dot(&yc);
        let max_diag = gram.diag().iter().copied().fold(0.0, f64::max);
        Self {
            n,
            x_means,
            y_mean,
            gram,
            xty,
            max_diag,
        }
    }

    pub fn width(&self) -> usize {
        self.gram.nrows()
    }

    /// Statistics restricted to the given columns, as if the design held only those.
    pub fn subset(&self, columns: &[usize]) -> Self {
        let gram = self
            .gram
            .select(Axis(0), columns)
            .select(Axis(1), columns);
        let max_diag = gram.diag().iter().copied().fold(0.0, f64::max);
        Self {
            n: self.n,
            x_means: self.x_means.select(Axis(0), columns),
            y_mean: self.y_mean,
            gram,
            xty: self.xty.select(Axis(0), columns),
            max_diag,
        }
    }

    fn finish(&self, weights: Array1<f64>, fallback_alpha: Option<f64>) -> LinearModel {
        let intercept = self.y_mean - weights.dot(&self.x_means);
        LinearModel {
            weights: weights.to_vec(),
            intercept,
            fallback_alpha,
        }
    }

    /// Exact solve of `(G + alpha·I) w = Xᵀy`.
    ///
    /// With `alpha == 0` a pivot below the rank tolerance is an error.
    pub fn solve(&self, alpha: f64) -> Result<LinearModel, RegressError> {
        if self.width() == 0 {
            return Ok(self.finish(Array1::zeros(0), None));
        }
        let min_pivot = if alpha == 0.0 {
            RANK_TOLERANCE * self.max_diag
        } else {
            0.0
        };
        let ch = Cholesky::factor(self.gram.view(), alpha, min_pivot).map_err(|e| {
            RegressError::RankDeficient {
                column: e.index,
                pivot: e.pivot,
            }
        })?;
        Ok(self.finish(ch.solve(self.xty.view()), None))
    }

    /// Like [`solve`](Self::solve), but a singular system is retried with a
    /// ridge strength of [`RANK_FALLBACK_ALPHA`], raised a hundredfold until
    /// the factorization succeeds.
    pub fn solve_with_fallback(&self, alpha: f64) -> LinearModel {
        match self.solve(alpha) {
            Ok(m) => m,
            Err(err) => {
                let mut a = alpha.max(RANK_FALLBACK_ALPHA);
                if a == alpha {
                    a *= 100.0;
                }
                loop {
                    if let Ok(ch) = Cholesky::factor(self.gram.view(), a, 0.0) {
                        log::debug!("{err}; solved with ridge alpha {a:e}");
                        return self.finish(ch.solve(self.xty.view()), Some(a));
                    }
                    a *= 100.0;
                    assert!(a.is_finite(), "gram matrix is not finite");
                }
            }
        }
    }
}

/// Ordinary least squares. With `allow_fallback`, a rank-deficient design is
/// solved as ridge with alpha [`RANK_FALLBACK_ALPHA`] and a warning is logged.
pub fn fit_linear(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    fit_intercept: bool,
    allow_fallback: bool,
) -> Result<LinearModel, RegressError> {
    let g = CenteredGram::new(x, y, fit_intercept);
    if allow_fallback {
        let m = g.solve_with_fallback(0.0);
        if let Some(a) = m.fallback_alpha {
            log::warn!("rank-deficient least squares; fell back to ridge alpha {a:e}");
        }
        Ok(m)
    } else {
        g.solve(0.0)
    }
}

/// Minimizes `|y - Xw - b|² + alpha·|w|²`; the intercept is not penalized.
pub fn fit_ridge(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    alpha: f64,
    fit_intercept: bool,
) -> LinearModel {
    CenteredGram::new(x, y, fit_intercept).solve_with_fallback(alpha)
}

//! Recursive feature elimination with a least-squares ranking estimator.
//!
//! Starting from every column, the estimator is refitted on the surviving
//! columns and the column with the smallest absolute standardized coefficient
//! is dropped, one per round. Ties drop the highest column index. The
//! intercept is never a candidate.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::looks_standardized;
use crate::regress::CenteredGram;

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error("target size must be at least 1")]
    TargetZero,
    #[error("target size {target} exceeds the {width} available columns")]
    TargetTooLarge { target: usize, width: usize },
    #[error("design matrix is not standardized")]
    NotStandardized,
    #[error("{rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    pub target_size: usize,
    /// Surviving column indexes, ascending.
    pub selected: Vec<usize>,
    /// Columns in the order they were removed.
    pub elimination_order: Vec<usize>,
    /// Nested subsets for sizes p, p-1, ..., target_size (each ascending).
    pub per_size_subsets: Vec<Vec<usize>>,
}

/// Tolerance on mean and unit variance for the standardization check.
const STANDARDIZED_TOL: f64 = 1e-6;

fn check(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<(), SelectError> {
    if x.nrows() != y.len() {
        return Err(SelectError::LengthMismatch {
            rows: x.nrows(),
            targets: y.len(),
        });
    }
    if !looks_standardized(x, STANDARDIZED_TOL) {
        return Err(SelectError::NotStandardized);
    }
    Ok(())
}

/// Full elimination path from all columns down to `min_size`.
/// Returns the removal order.
fn eliminate(stats: &CenteredGram, min_size: usize) -> Vec<usize> {
    let mut alive: Vec<usize> = (0..stats.width()).collect();
    let mut removed = Vec::new();
    while alive.len() > min_size {
        let model = stats.subset(&alive).solve_with_fallback(0.0);
        let mut worst = 0;
        for k in 1..alive.len() {
            let (a, b) = (model.weights[k].abs(), model.weights[worst].abs());
            // later columns have higher indexes, so `<=` sends ties to the highest
            if a <= b {
                worst = k;
            }
        }
        removed.push(alive.remove(worst));
    }
    removed
}

fn result_for(p: usize, target: usize, removed: &[usize]) -> RfeResult {
    let steps = p - target;
    let elimination_order = removed[..steps].to_vec();
    let mut alive: Vec<usize> = (0..p).collect();
    let mut per_size_subsets = vec![alive.clone()];
    for c in &elimination_order {
        alive.retain(|a| a != c);
        per_size_subsets.push(alive.clone());
    }
    RfeResult {
        target_size: target,
        selected: alive,
        elimination_order,
        per_size_subsets,
    }
}

/// Eliminates columns of a standardized matrix until `target_size` remain.
pub fn rfe(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    target_size: usize,
) -> Result<RfeResult, SelectError> {
    Ok(rfe_sweep(x, y, &[target_size])?.remove(0))
}

/// One elimination pass serving every requested size. Results follow the
/// order of `sizes`.
pub fn rfe_sweep(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    sizes: &[usize],
) -> Result<Vec<RfeResult>, SelectError> {
    let p = x.ncols();
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(SelectError::TargetZero);
    }
    if let Some(&target) = sizes.iter().find(|&&s| s > p) {
        return Err(SelectError::TargetTooLarge { target, width: p });
    }
    check(x, y)?;
    let min_size = *sizes.iter().min().expect("non-empty");
    let stats = CenteredGram::new(x, y, true);
    let removed = eliminate(&stats, min_size);
    Ok(sizes.iter().map(|&s| result_for(p, s, &removed)).collect())
}

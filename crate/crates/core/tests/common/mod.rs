//! Shared oracles and fixtures for the integration tests.
#![allow(dead_code)]

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use tti_core::features::Scaler;
use tti_core::ingest::JoinedRecord;
use tti_core::rng::rng_from;
use tti_core::{join_tti_weather, synthesize_dataset};

pub fn gaussian(seed: u64, n: usize, p: usize) -> Array2<f64> {
    let mut rng = rng_from(seed, &[7]);
    Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal))
}

pub fn standardized(seed: u64, n: usize, p: usize) -> Array2<f64> {
    let raw = gaussian(seed, n, p);
    Scaler::fit(raw.view()).transform(raw.view())
}

/// `y = x·w + 0.5 + noise_sd·N(0, 1)`.
pub fn linear_target(seed: u64, x: ArrayView2<'_, f64>, w: &[f64], noise_sd: f64) -> Array1<f64> {
    let mut rng = rng_from(seed, &[8]);
    let w = ArrayView1::from(w);
    x.dot(&w).mapv(|v| v + 0.5 + noise_sd * rng.sample::<f64, _>(StandardNormal))
}

/// Least squares with an intercept through the normal equations, solved
/// densely by nalgebra. Returns `(intercept, weights)`.
pub fn ols_oracle(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> (f64, Vec<f64>) {
    let (n, p) = x.dim();
    let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[[i, j - 1]] });
    let b = DVector::from_iterator(n, y.iter().copied());
    let ata = a.transpose() * &a;
    let atb = a.transpose() * b;
    let sol = ata.lu().solve(&atb).expect("full-rank oracle problem");
    (sol[0], sol.iter().skip(1).copied().collect())
}

/// `|y − Xw − b|² + α|w|²`.
pub fn ridge_objective(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, w: &[f64], b: f64, alpha: f64) -> f64 {
    let r = x.dot(&ArrayView1::from(w)) + b - y;
    r.dot(&r) + alpha * w.iter().map(|v| v * v).sum::<f64>()
}

/// Gradient of [`ridge_objective`] in `(w, b)`, with `b` last.
pub fn ridge_gradient(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, w: &[f64], b: f64, alpha: f64) -> Vec<f64> {
    let r = x.dot(&ArrayView1::from(w)) + b - y;
    let mut g: Vec<f64> = x
        .t()
        .dot(&r)
        .iter()
        .zip(w)
        .map(|(xr, wj)| 2.0 * xr + 2.0 * alpha * wj)
        .collect();
    g.push(2.0 * r.sum());
    g
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

/// Regression tree grown by brute force: every node tries every feature and
/// every midpoint, scoring children by their directly computed squared error.
#[derive(Debug)]
pub enum OracleTree {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<OracleTree>,
        right: Box<OracleTree>,
    },
}

fn sse(y: ArrayView1<'_, f64>, rows: &[usize]) -> f64 {
    let m = rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64;
    rows.iter().map(|&r| (y[r] - m).powi(2)).sum()
}

pub fn oracle_tree(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    rows: &[usize],
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
) -> OracleTree {
    let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64;
    if depth >= max_depth || rows.len() < 2 * min_leaf {
        return OracleTree::Leaf(mean);
    }
    let parent = sse(y, rows);
    if parent <= 0.0 {
        return OracleTree::Leaf(mean);
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..x.ncols() {
        let mut values: Vec<f64> = rows.iter().map(|&r| x[[r, f]]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let t = 0.5 * (pair[0] + pair[1]);
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[[i, f]] <= t);
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            let gain = parent - sse(y, &l) - sse(y, &r);
            if best.is_none_or(|(g, _, _)| gain - g > 1e-10 * parent) {
                best = Some((gain, f, t));
            }
        }
    }
    match best {
        Some((gain, feature, threshold)) if gain > 1e-10 * parent => {
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| x[[i, feature]] <= threshold);
            OracleTree::Split {
                feature,
                threshold,
                left: Box::new(oracle_tree(x, y, &l, depth + 1, max_depth, min_leaf)),
                right: Box::new(oracle_tree(x, y, &r, depth + 1, max_depth, min_leaf)),
            }
        }
        _ => OracleTree::Leaf(mean),
    }
}

impl OracleTree {
    pub fn predict(&self, row: ArrayView1<'_, f64>) -> f64 {
        match self {
            OracleTree::Leaf(v) => *v,
            OracleTree::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

/// Minimum of the SVR dual over `Σβ = 0, |β| ≤ C` by repeated grid search:
/// a full grid over the first `n − 1` coordinates, then finer grids around
/// the best point.
pub fn svr_dual_brute(k: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, c: f64, eps: f64) -> f64 {
    let n = y.len();
    let d = n - 1;
    let steps = 8usize;
    let mut centre = vec![0.0; d];
    let mut half = c;
    let mut best = f64::INFINITY;
    for _ in 0..10 {
        let h = 2.0 * half / steps as f64;
        let mut idx = vec![0usize; d];
        let mut next = centre.clone();
        loop {
            let mut beta: Vec<f64> = (0..d)
                .map(|j| (centre[j] - half + h * idx[j] as f64).clamp(-c, c))
                .collect();
            let last = -beta.iter().sum::<f64>();
            if last.abs() <= c {
                beta.push(last);
                let v = tti_core::regress::dual_objective(k, y, &beta, eps);
                if v < best {
                    best = v;
                    next = beta[..d].to_vec();
                }
            }
            let mut j = 0;
            while j < d {
                idx[j] += 1;
                if idx[j] <= steps {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == d {
                break;
            }
        }
        centre = next;
        half /= 3.0;
    }
    best
}

/// Full-length synthetic records for a master seed.
pub fn synthetic_records(seed: u64) -> Vec<JoinedRecord> {
    let d = synthesize_dataset(
        NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(),
        NaiveDate::from_ymd_opt(2016, 6, 26).unwrap(),
        seed,
    )
    .unwrap();
    join_tti_weather(&d.tti, &d.weather).unwrap().records
}

/// About ten weeks of synthetic records.
pub fn short_records(seed: u64) -> Vec<JoinedRecord> {
    let d = synthesize_dataset(
        NaiveDate::from_ymd_opt(2014, 3, 1).unwrap(),
        NaiveDate::from_ymd_opt(2014, 5, 10).unwrap(),
        seed,
    )
    .unwrap();
    join_tti_weather(&d.tti, &d.weather).unwrap().records
}

//! R² scoring, k-fold cross-validation and the repeated sampling protocol.
//!
//! Every fold runs the same feature pipeline, fitted on the training rows
//! only: standardize the raw columns, expand polynomially, drop columns that
//! are constant on the training rows (the monomial `1` among them, since every
//! model carries its own intercept), then standardize again.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    checked_plan, DesignMatrix, FeatureError, PolyPlan, Scaler, DEFAULT_EXPANSION_CAP,
};
use crate::par::{self, Parallelism};
use crate::regress::{
    kernel_matrix, CenteredGram, LassoSolver, ModelSpec, RegressError, ResolvedKernel, SvrModel,
    SvrProblem, TreeModel, DEFAULT_SVR_TOL,
};
use crate::rng::{derive_seed, rng_from, stream};

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("target is constant, R² is undefined")]
    ConstantTarget,
    #[error("{actual} actuals but {predicted} predictions")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("cannot score an empty set")]
    Empty,
    #[error("k = {k} folds is invalid for {n} rows (need 2 <= k <= n)")]
    InvalidK { k: usize, n: usize },
    #[error("sample size {requested} exceeds the {available} available rows")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("fold {fold}: {source}")]
    Fit {
        fold: usize,
        #[source]
        source: RegressError,
    },
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// `1 - SS_res / SS_tot`.
pub fn r2_score(y: ArrayView1<'_, f64>, f: ArrayView1<'_, f64>) -> Result<f64, EvaluateError> {
    if y.len() != f.len() {
        return Err(EvaluateError::LengthMismatch {
            actual: y.len(),
            predicted: f.len(),
        });
    }
    if y.is_empty() {
        return Err(EvaluateError::Empty);
    }
    let mean = y.sum() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot <= 0.0 {
        return Err(EvaluateError::ConstantTarget);
    }
    let ss_res: f64 = y.iter().zip(f.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Shuffles `0..n` with `seed` and deals it into `k` folds; the first `n % k`
/// folds hold one extra row. Each fold is sorted ascending.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvaluateError> {
    if k < 2 || n < k {
        return Err(EvaluateError::InvalidK { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed, &[]));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// Feature pipeline settings applied inside every fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preprocess {
    pub degree: u32,
    pub width_cap: usize,
}

impl Default for Preprocess {
    fn default() -> Self {
        Self {
            degree: 1,
            width_cap: DEFAULT_EXPANSION_CAP,
        }
    }
}

impl Preprocess {
    pub fn degree(degree: u32) -> Self {
        Self {
            degree,
            ..Self::default()
        }
    }
}

/// Standardizes with `pre` and zeroes the columns `pre` found constant, so
/// they vanish from every monomial instead of rescaling it.
fn centered(pre: &Scaler, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut z = pre.transform(x);
    for (j, _) in pre.constant.iter().enumerate().filter(|(_, c)| **c) {
        z.column_mut(j).fill(0.0);
    }
    z
}

/// A fitted feature pipeline: raw columns to model inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub pre: Scaler,
    pub degree: u32,
    /// Expanded columns kept after dropping training-constant ones.
    pub kept: Vec<usize>,
    pub post: Scaler,
}

impl FeaturePipeline {
    /// Fits on `x` and returns the transformed training matrix alongside.
    pub fn fit(
        x: ArrayView2<'_, f64>,
        preprocess: Preprocess,
    ) -> Result<(Self, Array2<f64>), EvaluateError> {
        if x.nrows() < 2 {
            return Err(FeatureError::TooFewRows { rows: x.nrows() }.into());
        }
        let plan = checked_plan(x.ncols(), preprocess.degree, preprocess.width_cap)?;
        let pre = Scaler::fit(x);
        let expanded = plan.expand(centered(&pre, x).view());
        let kept: Vec<usize> = Scaler::fit(expanded.view())
            .constant
            .iter()
            .enumerate()
            .filter(|(_, c)| !**c)
            .map(|(j, _)| j)
            .collect();
        let expanded = expanded.select(Axis(1), &kept);
        let post = Scaler::fit(expanded.view());
        let out = post.transform(expanded.view());
        Ok((
            Self {
                pre,
                degree: preprocess.degree,
                kept,
                post,
            },
            out,
        ))
    }

    pub fn input_width(&self) -> usize {
        self.pre.width()
    }

    pub fn output_width(&self) -> usize {
        self.kept.len()
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let plan = PolyPlan::new(self.input_width(), self.degree);
        self.transform_with(&plan, x)
    }

    fn transform_with(&self, plan: &PolyPlan, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let expanded = plan.expand(centered(&self.pre, x).view());
        self.post
            .transform(expanded.select(Axis(1), &self.kept).view())
    }
}

/// One train/validation split after the feature pipeline.
#[derive(Debug, Clone)]
pub struct PreparedFold {
    pub train_rows: Vec<usize>,
    pub valid_rows: Vec<usize>,
    pub pipeline: FeaturePipeline,
    pub train_x: Array2<f64>,
    pub train_y: Array1<f64>,
    pub valid_x: Array2<f64>,
    pub valid_y: Array1<f64>,
}

/// Fits the pipeline on `folds` minus fold `held_out` and applies it to the held-out rows.
pub fn prepare_fold(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    folds: &[Vec<usize>],
    held_out: usize,
    preprocess: Preprocess,
) -> Result<PreparedFold, EvaluateError> {
    let valid_rows = folds[held_out].clone();
    let mut train_rows: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != held_out)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    train_rows.sort_unstable();
    let (pipeline, train_x) = FeaturePipeline::fit(x.select(Axis(0), &train_rows).view(), preprocess)?;
    let valid_x = pipeline.transform(x.select(Axis(0), &valid_rows).view());
    Ok(PreparedFold {
        train_y: y.select(Axis(0), &train_rows),
        valid_y: y.select(Axis(0), &valid_rows),
        train_rows,
        valid_rows,
        pipeline,
        train_x,
        valid_x,
    })
}

fn score_fold(fold: &PreparedFold, pred: &Array1<f64>, index: usize) -> f64 {
    match r2_score(fold.valid_y.view(), pred.view()) {
        Ok(s) => s,
        Err(EvaluateError::ConstantTarget) => {
            log::warn!("validation fold {index} has a constant target; scored as 0");
            0.0
        }
        Err(e) => unreachable!("prediction shape: {e}"),
    }
}

/// Validation predictions for several specs on one fold, sharing work where
/// the specs allow it: one Gram matrix for the linear family, one kernel
/// matrix per SVR kernel, one deep tree per `min_leaf`.
///
/// The numbers for a spec do not depend on which other specs are present.
pub(crate) fn predict_specs(
    fold: &PreparedFold,
    specs: &[ModelSpec],
    timings: &mut [f64],
) -> Vec<Result<Array1<f64>, RegressError>> {
    let (tx, ty, vx) = (fold.train_x.view(), fold.train_y.view(), fold.valid_x.view());
    let mut gram: Option<CenteredGram> = None;
    let mut svr: Vec<(ResolvedKernel, SvrProblem, Array2<f64>)> = Vec::new();
    let mut trees: Vec<(usize, TreeModel)> = Vec::new();
    // shared setup time is charged to the first spec that needs it
    let mut out = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let start = Instant::now();
        let r = (|| -> Result<Array1<f64>, RegressError> {
            spec.validate()?;
            match *spec {
                ModelSpec::Linear | ModelSpec::Ridge { .. } | ModelSpec::Lasso { .. } => {
                    let g = gram.get_or_insert_with(|| CenteredGram::new(tx, ty, true));
                    let model = match *spec {
                        ModelSpec::Linear => {
                            let m = g.solve_with_fallback(0.0);
                            if let Some(a) = m.fallback_alpha {
                                log::debug!("rank-deficient fold; ridge alpha {a:e} used");
                            }
                            m
                        }
                        ModelSpec::Ridge { alpha } => g.solve_with_fallback(alpha),
                        ModelSpec::Lasso {
                            alpha,
                            tol,
                            max_iter,
                        } => LassoSolver::new(g)?.solve(alpha, tol, max_iter)?,
                        _ => unreachable!(),
                    };
                    Ok(model.predict(vx))
                }
                ModelSpec::Svr { c, epsilon, kernel } => {
                    let resolved = ResolvedKernel::resolve(kernel, tx);
                    let pos = match svr.iter().position(|s| s.0 == resolved) {
                        Some(p) => p,
                        None => {
                            let problem = SvrProblem::new(tx, ty, resolved);
                            let cross = kernel_matrix(resolved, vx, tx);
                            svr.push((resolved, problem, cross));
                            svr.len() - 1
                        }
                    };
                    let (_, problem, cross) = &svr[pos];
                    let sol = problem.solve(c, epsilon, DEFAULT_SVR_TOL)?;
                    Ok(SvrModel::predict_from_cross_kernel(cross.view(), &sol))
                }
                ModelSpec::Tree {
                    max_depth,
                    min_leaf,
                } => {
                    if !trees.iter().any(|t| t.0 == min_leaf) {
                        let deepest = specs
                            .iter()
                            .filter_map(|s| match *s {
                                ModelSpec::Tree {
                                    max_depth,
                                    min_leaf: m,
                                } if m == min_leaf => Some(max_depth),
                                _ => None,
                            })
                            .max()
                            .unwrap_or(max_depth);
                        let t = crate::regress::fit_tree(tx, ty, deepest, min_leaf);
                        trees.push((min_leaf, t));
                    }
                    let t = &trees.iter().find(|t| t.0 == min_leaf).expect("grown").1;
                    Ok(t.truncated(max_depth).predict(vx))
                }
            }
        })();
        timings[i] += start.elapsed().as_secs_f64();
        out.push(r);
    }
    out
}

/// Outcome of k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub per_fold: Vec<f64>,
    pub mean: f64,
    pub fold_seed: u64,
    /// Seed of the row sample this run used, if any.
    pub sample_seed: Option<u64>,
    pub n_sampled: usize,
}

impl CvScore {
    fn new(per_fold: Vec<f64>, fold_seed: u64, sample_seed: Option<u64>, n_sampled: usize) -> Self {
        let mean = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
        Self {
            per_fold,
            mean,
            fold_seed,
            sample_seed,
            n_sampled,
        }
    }
}

/// Cross-validates several specs over the same folds. Per-spec results are
/// independent: one failing spec does not affect the others.
pub(crate) fn cross_validate_many(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    specs: &[ModelSpec],
    k: usize,
    fold_seed: u64,
    preprocess: Preprocess,
    timings: &mut [f64],
) -> Result<Vec<Result<Vec<f64>, EvaluateError>>, EvaluateError> {
    let folds = kfold_split(x.nrows(), k, fold_seed)?;
    let mut scores: Vec<Result<Vec<f64>, EvaluateError>> =
        specs.iter().map(|_| Ok(Vec::with_capacity(k))).collect();
    for i in 0..k {
        let start = Instant::now();
        let fold = prepare_fold(x, y, &folds, i, preprocess)?;
        let shared = start.elapsed().as_secs_f64() / specs.len().max(1) as f64;
        for t in timings.iter_mut() {
            *t += shared;
        }
        let live: Vec<usize> = (0..specs.len()).filter(|&s| scores[s].is_ok()).collect();
        let live_specs: Vec<ModelSpec> = live.iter().map(|&s| specs[s]).collect();
        let mut live_times = vec![0.0; live.len()];
        let preds = predict_specs(&fold, &live_specs, &mut live_times);
        for ((&s, pred), dt) in live.iter().zip(preds).zip(live_times) {
            timings[s] += dt;
            match pred {
                Ok(p) => {
                    let v = score_fold(&fold, &p, i);
                    if let Ok(v_s) = &mut scores[s] {
                        v_s.push(v);
                    }
                }
                Err(source) => scores[s] = Err(EvaluateError::Fit { fold: i, source }),
            }
        }
    }
    Ok(scores)
}

/// k-fold cross-validation of `spec` on `(x, y)`. The feature pipeline is
/// fitted on the training folds only.
pub fn cross_validate(
    spec: &ModelSpec,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    k: usize,
    seed: u64,
    preprocess: Preprocess,
) -> Result<CvScore, EvaluateError> {
    if x.nrows() != y.len() {
        return Err(EvaluateError::LengthMismatch {
            actual: y.len(),
            predicted: x.nrows(),
        });
    }
    let per_fold = cross_validate_many(x, y, &[*spec], k, seed, preprocess, &mut [0.0])?
        .pop()
        .expect("one spec")?;
    Ok(CvScore::new(per_fold, seed, None, x.nrows()))
}

/// Sample size, repeat count, fold count and master seed of the repeated protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protocol {
    pub sample_size: usize,
    pub repeats: usize,
    pub k: usize,
    pub seed: u64,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            sample_size: 1000,
            repeats: 10,
            k: 5,
            seed: 0,
        }
    }
}

impl Protocol {
    pub fn sample_seed(&self, repeat: usize) -> u64 {
        derive_seed(self.seed, &[stream::SAMPLE, repeat as u64])
    }

    pub fn fold_seed(&self, repeat: usize) -> u64 {
        derive_seed(self.seed, &[stream::FOLDS, repeat as u64])
    }

    /// Rows drawn for `repeat`: the first `sample_size` entries of a seeded
    /// permutation of `0..n`, sorted ascending.
    pub fn sample_rows(&self, n: usize, repeat: usize) -> Result<Vec<usize>, EvaluateError> {
        if self.sample_size > n {
            return Err(EvaluateError::SampleTooLarge {
                requested: self.sample_size,
                available: n,
            });
        }
        let mut rows: Vec<usize> = (0..n).collect();
        let mut rng = rng_from(self.sample_seed(repeat), &[]);
        rows.partial_shuffle(&mut rng, self.sample_size);
        rows.truncate(self.sample_size);
        rows.sort_unstable();
        Ok(rows)
    }

    fn check(&self, n: usize) -> Result<(), EvaluateError> {
        if self.sample_size > n {
            return Err(EvaluateError::SampleTooLarge {
                requested: self.sample_size,
                available: n,
            });
        }
        if self.k < 2 || self.sample_size < self.k {
            return Err(EvaluateError::InvalidK {
                k: self.k,
                n: self.sample_size,
            });
        }
        if self.repeats == 0 {
            return Err(EvaluateError::Empty);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedCvScore {
    pub per_repeat: Vec<CvScore>,
    /// Average of the per-repeat means.
    pub mean: f64,
}

impl RepeatedCvScore {
    pub(crate) fn new(per_repeat: Vec<CvScore>) -> Self {
        let mean = per_repeat.iter().map(|s| s.mean).sum::<f64>() / per_repeat.len() as f64;
        Self { per_repeat, mean }
    }

    pub fn scores(&self) -> Vec<f64> {
        self.per_repeat.iter().map(|s| s.mean).collect()
    }
}

/// Draws `protocol.repeats` row samples, cross-validates `spec` on each and
/// averages the repeat means. Repeats may run concurrently; results are
/// reduced in repeat order.
pub fn repeated_sampled_cv(
    matrix: &DesignMatrix,
    spec: &ModelSpec,
    preprocess: Preprocess,
    protocol: Protocol,
    parallelism: Parallelism,
) -> Result<RepeatedCvScore, EvaluateError> {
    protocol.check(matrix.n_rows())?;
    let repeats: Vec<usize> = (0..protocol.repeats).collect();
    let per_repeat = par::map(parallelism, &repeats, |&r| {
        let rows = protocol.sample_rows(matrix.n_rows(), r)?;
        let x = matrix.x.select(Axis(0), &rows);
        let y = matrix.y.select(Axis(0), &rows);
        let fold_seed = protocol.fold_seed(r);
        let mut score = cross_validate(spec, x.view(), y.view(), protocol.k, fold_seed, preprocess)?;
        score.sample_seed = Some(protocol.sample_seed(r));
        Ok(score)
    })
    .into_iter()
    .collect::<Result<Vec<_>, EvaluateError>>()?;
    Ok(RepeatedCvScore::new(per_repeat))
}

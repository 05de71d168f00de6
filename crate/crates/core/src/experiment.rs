//! The model × parameter × subset size × degree grid and its summary tables.
//!
//! For each repeat the grid draws one row sample, runs a single RFE sweep on
//! the standardized sample and reuses those subsets for every cell. All cells
//! of a repeat share the same sample and folds, so cell scores differ only
//! through the model, the subset and the degree.

use std::fmt::Write as _;
use std::io::{Read, Write};

use ndarray::Axis;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::{cross_validate_many, EvaluateError, Preprocess, Protocol};
use crate::features::{expanded_width, DesignMatrix, PredictionCase, Scaler, MAX_DEGREE};
use crate::par::{self, Parallelism};
use crate::regress::{Family, Kernel, ModelSpec};
use crate::select::{rfe_sweep, SelectError};

/// Largest subset size the grid accepts.
pub const MAX_SUBSET_SIZE: usize = 24;
/// Default expansion width cap for grid cells.
pub const GRID_WIDTH_CAP: usize = 500;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid grid config: {0}")]
    InvalidConfig(String),
    #[error("matrix has {got} columns, the grid expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Evaluate(#[from] EvaluateError),
    #[error("feature selection on repeat {repeat}: {source}")]
    Select {
        repeat: usize,
        #[source]
        source: SelectError,
    },
    #[error("no successful cell for {}", .0.display_name())]
    MissingFamily(Family),
    #[error("results file: {0}")]
    Io(String),
}

/// Parameter ranges per family. An empty range leaves the family out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyGrids {
    pub linear: bool,
    pub ridge_alpha: Vec<f64>,
    pub lasso_alpha: Vec<f64>,
    pub svr_c: Vec<f64>,
    pub svr_epsilon: Vec<f64>,
    pub tree_depth: Vec<usize>,
}

impl Default for FamilyGrids {
    fn default() -> Self {
        let alpha = vec![0.01, 0.1, 0.19, 0.5, 1.0, 1.9, 5.0, 10.0];
        Self {
            linear: true,
            ridge_alpha: alpha.clone(),
            lasso_alpha: alpha,
            svr_c: vec![0.5, 1.0, 1.6, 2.8, 5.0],
            svr_epsilon: vec![0.05, 0.1, 0.2],
            tree_depth: vec![1, 2, 3, 5, 8],
        }
    }
}

/// Grid definition, read from and written to `grid.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub case: PredictionCase,
    pub families: FamilyGrids,
    pub sizes: Vec<usize>,
    pub degrees: Vec<u32>,
    pub sample_size: usize,
    pub repeats: usize,
    pub k: usize,
    pub seed: u64,
    /// Cells whose expanded width exceeds this are skipped.
    pub width_cap: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let protocol = Protocol::default();
        Self {
            case: PredictionCase::ShortTerm,
            families: FamilyGrids::default(),
            sizes: (1..=MAX_SUBSET_SIZE).collect(),
            degrees: (1..=MAX_DEGREE).collect(),
            sample_size: protocol.sample_size,
            repeats: protocol.repeats,
            k: protocol.k,
            seed: protocol.seed,
            width_cap: GRID_WIDTH_CAP,
        }
    }
}

impl GridConfig {
    pub fn for_case(case: PredictionCase) -> Self {
        Self {
            case,
            ..Self::default()
        }
    }

    pub fn from_json(s: &str) -> Result<Self, ExperimentError> {
        let cfg: GridConfig =
            serde_json::from_str(s).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn protocol(&self) -> Protocol {
        Protocol {
            sample_size: self.sample_size,
            repeats: self.repeats,
            k: self.k,
            seed: self.seed,
        }
    }

    /// Model specs in grid order: linear, ridge, lasso, svr (C-major), tree.
    pub fn specs(&self) -> Vec<ModelSpec> {
        let f = &self.families;
        let mut out = Vec::new();
        if f.linear {
            out.push(ModelSpec::Linear);
        }
        out.extend(f.ridge_alpha.iter().map(|&a| ModelSpec::ridge(a)));
        out.extend(f.lasso_alpha.iter().map(|&a| ModelSpec::lasso(a)));
        for &c in &f.svr_c {
            for &e in &f.svr_epsilon {
                out.push(ModelSpec::Svr {
                    c,
                    epsilon: e,
                    kernel: Kernel::default(),
                });
            }
        }
        out.extend(f.tree_depth.iter().map(|&d| ModelSpec::tree(d)));
        out
    }

    /// Number of cells, skipped ones included.
    pub fn cell_count(&self) -> usize {
        self.specs().len() * self.sizes.len() * self.degrees.len()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidConfig(m.into()));
        if self.specs().is_empty() {
            return bad("no model families configured");
        }
        if !self.families.svr_c.is_empty() && self.families.svr_epsilon.is_empty()
            || self.families.svr_c.is_empty() && !self.families.svr_epsilon.is_empty()
        {
            return bad("svr_c and svr_epsilon must both be empty or both non-empty");
        }
        if self.sizes.is_empty() || self.degrees.is_empty() {
            return bad("sizes and degrees must be non-empty");
        }
        if self.sizes.iter().any(|s| !(1..=MAX_SUBSET_SIZE).contains(s)) {
            return bad("sizes must lie in 1..=24");
        }
        if self.degrees.iter().any(|d| !(1..=MAX_DEGREE).contains(d)) {
            return bad("degrees must lie in 1..=5");
        }
        if has_duplicates(&self.sizes) || has_duplicates(&self.degrees) {
            return bad("sizes and degrees must not repeat");
        }
        if self.repeats == 0 || self.k < 2 || self.sample_size < self.k {
            return bad("need repeats >= 1, k >= 2 and sample_size >= k");
        }
        for spec in self.specs() {
            spec.validate()
                .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }
}

fn has_duplicates<T: PartialEq>(v: &[T]) -> bool {
    v.iter().enumerate().any(|(i, a)| v[..i].contains(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// The expanded width exceeded the cap; nothing was fitted.
    Skipped,
    Failed,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Skipped => "skipped",
            CellStatus::Failed => "failed",
        }
    }
}

/// One grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub case: PredictionCase,
    pub spec: ModelSpec,
    pub n_features: usize,
    pub degree: u32,
    pub status: CellStatus,
    /// Mean of `repeat_scores`; NaN unless the cell succeeded.
    pub mean_score: f64,
    pub repeat_scores: Vec<f64>,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl ExperimentResult {
    pub fn family(&self) -> Family {
        self.spec.family()
    }
}

struct RepeatSample {
    x: ndarray::Array2<f64>,
    y: ndarray::Array1<f64>,
    /// Selected columns per configured size, in `config.sizes` order.
    subsets: Vec<Vec<usize>>,
}

/// Runs every configured cell on `matrix`, the 93-column matrix of `config.case`.
///
/// Cells run concurrently under `Parallelism::Rayon`; the output is the same
/// for both modes and ordered by size, then degree, then spec.
pub fn run_grid(
    matrix: &DesignMatrix,
    config: &GridConfig,
    parallelism: Parallelism,
) -> Result<Vec<ExperimentResult>, ExperimentError> {
    config.validate()?;
    let protocol = config.protocol();
    if protocol.sample_size > matrix.n_rows() {
        return Err(EvaluateError::SampleTooLarge {
            requested: protocol.sample_size,
            available: matrix.n_rows(),
        }
        .into());
    }
    if let Some(&s) = config.sizes.iter().find(|&&s| s > matrix.n_cols()) {
        return Err(ExperimentError::InvalidConfig(format!(
            "subset size {s} exceeds the {} matrix columns",
            matrix.n_cols()
        )));
    }
    let specs = config.specs();

    let repeats: Vec<usize> = (0..protocol.repeats).collect();
    let samples = par::map(parallelism, &repeats, |&r| -> Result<RepeatSample, ExperimentError> {
        let rows = protocol.sample_rows(matrix.n_rows(), r)?;
        let x = matrix.x.select(Axis(0), &rows);
        let y = matrix.y.select(Axis(0), &rows);
        let z = Scaler::fit(x.view()).transform(x.view());
        let subsets = rfe_sweep(z.view(), y.view(), &config.sizes)
            .map_err(|source| ExperimentError::Select { repeat: r, source })?
            .into_iter()
            .map(|res| res.selected)
            .collect();
        Ok(RepeatSample { x, y, subsets })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    // (size index, degree) pairs that fit under the cap
    let mut groups = Vec::new();
    for (si, &size) in config.sizes.iter().enumerate() {
        for &degree in &config.degrees {
            groups.push((si, size, degree, expanded_width(size, degree)));
        }
    }
    let units: Vec<(usize, usize, u32)> = groups
        .iter()
        .filter(|g| g.3 <= config.width_cap)
        .flat_map(|&(si, _, degree, _)| repeats.iter().map(move |&r| (si, r, degree)))
        .collect();
    let preprocess = |degree| Preprocess {
        degree,
        width_cap: config.width_cap,
    };
    let outcomes = par::map(parallelism, &units, |&(si, r, degree)| {
        let sample = &samples[r];
        let x = sample.x.select(Axis(1), &sample.subsets[si]);
        let mut timings = vec![0.0; specs.len()];
        let scores = cross_validate_many(
            x.view(),
            sample.y.view(),
            &specs,
            protocol.k,
            protocol.fold_seed(r),
            preprocess(degree),
            &mut timings,
        );
        (scores, timings)
    });

    let mut results = Vec::with_capacity(config.cell_count());
    let mut unit = 0;
    for &(_, size, degree, width) in &groups {
        if width > config.width_cap {
            for spec in &specs {
                results.push(ExperimentResult {
                    case: config.case,
                    spec: *spec,
                    n_features: size,
                    degree,
                    status: CellStatus::Skipped,
                    mean_score: f64::NAN,
                    repeat_scores: Vec::new(),
                    seconds: 0.0,
                    detail: Some(format!(
                        "expanded width {width} exceeds the cap of {}",
                        config.width_cap
                    )),
                });
            }
            continue;
        }
        let block = &outcomes[unit..unit + protocol.repeats];
        unit += protocol.repeats;
        for (s, spec) in specs.iter().enumerate() {
            let mut repeat_scores = Vec::with_capacity(protocol.repeats);
            let mut seconds = 0.0;
            let mut failure = None;
            for (r, (scores, timings)) in block.iter().enumerate() {
                seconds += timings[s];
                let folds = match scores {
                    Ok(per_spec) => per_spec[s].as_ref().map_err(|e| e.to_string()),
                    Err(e) => Err(e.to_string()),
                };
                match folds {
                    Ok(f) => repeat_scores.push(f.iter().sum::<f64>() / f.len() as f64),
                    Err(e) => {
                        failure.get_or_insert(format!("repeat {r}: {e}"));
                    }
                }
            }
            let (status, mean_score, detail) = match failure {
                None => (
                    CellStatus::Ok,
                    repeat_scores.iter().sum::<f64>() / repeat_scores.len() as f64,
                    None,
                ),
                Some(msg) => {
                    log::warn!(
                        "cell {} size {size} degree {degree} failed: {msg}",
                        spec.params_label()
                    );
                    repeat_scores.clear();
                    (CellStatus::Failed, f64::NAN, Some(msg))
                }
            };
            results.push(ExperimentResult {
                case: config.case,
                spec: *spec,
                n_features: size,
                degree,
                status,
                mean_score,
                repeat_scores,
                seconds,
                detail,
            });
        }
    }
    Ok(results)
}

/// Best cell of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub family: Family,
    pub spec: ModelSpec,
    pub n_features: usize,
    pub degree: u32,
    pub score: f64,
}

impl SummaryRow {
    pub fn model(&self) -> &'static str {
        self.family.display_name()
    }
}

/// Per family, the successful cell with the highest mean score. Ties go to
/// fewer variables, then the lower degree, then the earlier cell. Rows are
/// sorted by descending score.
pub fn best_per_model(results: &[ExperimentResult]) -> Result<Vec<SummaryRow>, ExperimentError> {
    let mut rows = Vec::new();
    for family in Family::ALL {
        let mut best: Option<&ExperimentResult> = None;
        for r in results
            .iter()
            .filter(|r| r.family() == family && r.status == CellStatus::Ok)
        {
            let better = match best {
                None => true,
                Some(b) => {
                    r.mean_score > b.mean_score
                        || r.mean_score == b.mean_score
                            && (r.n_features, r.degree) < (b.n_features, b.degree)
                }
            };
            if better {
                best = Some(r);
            }
        }
        let b = best.ok_or(ExperimentError::MissingFamily(family))?;
        rows.push(SummaryRow {
            family,
            spec: b.spec,
            n_features: b.n_features,
            degree: b.degree,
            score: b.mean_score,
        });
    }
    rows.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(rows)
}

const RESULT_HEADER: [&str; 10] = [
    "case",
    "family",
    "params",
    "n_features",
    "degree",
    "mean_score",
    "seconds",
    "status",
    "repeat_scores",
    "detail",
];

/// Writes `results.csv`. `params` holds the spec as JSON; `repeat_scores` is
/// `;`-separated.
pub fn write_results<W: Write>(results: &[ExperimentResult], out: W) -> Result<(), ExperimentError> {
    let io = |e: csv::Error| ExperimentError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_HEADER).map_err(io)?;
    for r in results {
        let scores: Vec<String> = r.repeat_scores.iter().map(f64::to_string).collect();
        w.write_record([
            r.case.as_str().to_string(),
            r.family().as_str().to_string(),
            serde_json::to_string(&r.spec).expect("spec serializes"),
            r.n_features.to_string(),
            r.degree.to_string(),
            if r.mean_score.is_nan() {
                String::new()
            } else {
                r.mean_score.to_string()
            },
            format!("{:.6}", r.seconds),
            r.status.as_str().to_string(),
            scores.join(";"),
            r.detail.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| ExperimentError::Io(e.to_string()))
}

/// Reads a file written by [`write_results`].
pub fn read_results<R: Read>(input: R) -> Result<Vec<ExperimentResult>, ExperimentError> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd
        .headers()
        .map_err(|e| ExperimentError::Io(e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ExperimentError::Io(format!("missing column `{name}`")))
    };
    let idx: Vec<usize> = RESULT_HEADER[..7]
        .iter()
        .map(|h| col(h))
        .collect::<Result<_, _>>()?;
    let opt = |name: &str| headers.iter().position(|h| h == name);
    let (status_i, scores_i, detail_i) = (opt("status"), opt("repeat_scores"), opt("detail"));
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let bad = |what: &str| ExperimentError::Io(format!("row {}: bad {what}", line + 2));
        let rec = rec.map_err(|e| ExperimentError::Io(e.to_string()))?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let case: PredictionCase = get(idx[0]).parse().map_err(|_| bad("case"))?;
        let spec: ModelSpec = serde_json::from_str(get(idx[2])).map_err(|_| bad("params"))?;
        let mean_text = get(idx[5]);
        let mean_score = if mean_text.is_empty() {
            f64::NAN
        } else {
            mean_text.parse().map_err(|_| bad("mean_score"))?
        };
        let status = match status_i.map(get).unwrap_or("ok") {
            "ok" | "" if !mean_score.is_nan() => CellStatus::Ok,
            "skipped" => CellStatus::Skipped,
            "failed" | "ok" | "" => CellStatus::Failed,
            _ => return Err(bad("status")),
        };
        let repeat_scores = match scores_i.map(get) {
            Some(s) if !s.is_empty() => s
                .split(';')
                .map(|v| v.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad("repeat_scores"))?,
            _ => Vec::new(),
        };
        out.push(ExperimentResult {
            case,
            spec,
            n_features: get(idx[3]).parse().map_err(|_| bad("n_features"))?,
            degree: get(idx[4]).parse().map_err(|_| bad("degree"))?,
            status,
            mean_score,
            repeat_scores,
            seconds: get(idx[6]).parse().map_err(|_| bad("seconds"))?,
            detail: detail_i.map(get).filter(|d| !d.is_empty()).map(String::from),
        });
    }
    Ok(out)
}

/// Summary as CSV: `model,parameters,variables,degree,score`.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "parameters", "variables", "degree", "score"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.model().to_string(),
            r.spec.params_label(),
            r.n_features.to_string(),
            r.degree.to_string(),
            format!("{:.4}", r.score),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Summary as a Markdown table.
pub fn summary_markdown(rows: &[SummaryRow], title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "### {title}\n");
    s.push_str("| Model | Best parameters | # Variables | Degree | Best score |\n");
    s.push_str("|---|---|---:|---:|---:|\n");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {:.4} |",
            r.model(),
            r.spec.params_label(),
            r.n_features,
            r.degree,
            r.score
        );
    }
    s
}

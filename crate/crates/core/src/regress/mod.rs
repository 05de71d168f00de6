//! The five regressor families behind one fit/predict interface.
//!
//! All linear-family fits carry an unpenalized intercept. Lasso uses the
//! `(1/2n)·RSS + alpha·|w|₁` objective; ridge uses `RSS + alpha·|w|²`.

mod lasso;
mod linear;
mod svr;
mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lasso::{fit_lasso, LassoSolver, DEFAULT_LASSO_MAX_ITER, DEFAULT_LASSO_TOL};
pub use linear::{fit_linear, fit_ridge, CenteredGram, LinearModel, RANK_FALLBACK_ALPHA};
pub use svr::{
    dual_objective, fit_svr, kernel_matrix, ResolvedKernel, SvrModel, SvrProblem, SvrSolution,
    DEFAULT_SVR_TOL,
};
pub use tree::{fit_tree, Node, TreeModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("design matrix is rank deficient (pivot {pivot:e} at column {column})")]
    RankDeficient { column: usize, pivot: f64 },
    #[error("solver did not converge after {iterations} iterations (max violation {max_violation:e})")]
    NotConverged { iterations: usize, max_violation: f64 },
    #[error("expected {expected} feature columns, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("column {column} is not standardized (variance {variance})")]
    NotStandardized { column: usize, variance: f64 },
    #[error("need at least {needed} training rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("{rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Linear,
    Ridge,
    Lasso,
    Svr,
    Tree,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Linear,
        Family::Ridge,
        Family::Lasso,
        Family::Svr,
        Family::Tree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Ridge => "ridge",
            Family::Lasso => "lasso",
            Family::Svr => "svr",
            Family::Tree => "tree",
        }
    }

    /// Human-readable model name as used in summary tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Family::Linear => "Linear Regression",
            Family::Ridge => "Ridge Regression",
            Family::Lasso => "Lasso Regression",
            Family::Svr => "SVR",
            Family::Tree => "Decision Tree Regressor",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = RegressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| RegressError::InvalidParameter(format!("unknown model family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    /// `gamma: None` resolves to `1 / (p · mean column variance)` at fit time.
    Rbf {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Rbf { gamma: None }
    }
}

fn default_min_leaf() -> usize {
    1
}

fn default_lasso_tol() -> f64 {
    DEFAULT_LASSO_TOL
}

fn default_lasso_max_iter() -> usize {
    DEFAULT_LASSO_MAX_ITER
}

/// A regressor family with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Linear,
    Ridge {
        alpha: f64,
    },
    Lasso {
        alpha: f64,
        #[serde(default = "default_lasso_tol")]
        tol: f64,
        #[serde(default = "default_lasso_max_iter")]
        max_iter: usize,
    },
    Svr {
        c: f64,
        epsilon: f64,
        #[serde(default)]
        kernel: Kernel,
    },
    Tree {
        max_depth: usize,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
    },
}

impl ModelSpec {
    pub fn ridge(alpha: f64) -> Self {
        ModelSpec::Ridge { alpha }
    }

    pub fn lasso(alpha: f64) -> Self {
        ModelSpec::Lasso {
            alpha,
            tol: DEFAULT_LASSO_TOL,
            max_iter: DEFAULT_LASSO_MAX_ITER,
        }
    }

    pub fn svr(c: f64, epsilon: f64) -> Self {
        ModelSpec::Svr {
            c,
            epsilon,
            kernel: Kernel::default(),
        }
    }

    pub fn tree(max_depth: usize) -> Self {
        ModelSpec::Tree {
            max_depth,
            min_leaf: 1,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ModelSpec::Linear => Family::Linear,
            ModelSpec::Ridge { .. } => Family::Ridge,
            ModelSpec::Lasso { .. } => Family::Lasso,
            ModelSpec::Svr { .. } => Family::Svr,
            ModelSpec::Tree { .. } => Family::Tree,
        }
    }

    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<(), RegressError> {
        let bad = |m: String| Err(RegressError::InvalidParameter(m));
        match *self {
            ModelSpec::Linear => Ok(()),
            ModelSpec::Ridge { alpha } if !(alpha >= 0.0 && alpha.is_finite()) => {
                bad(format!("ridge alpha must be >= 0, got {alpha}"))
            }
            ModelSpec::Lasso { alpha, .. } if !(alpha > 0.0 && alpha.is_finite()) => {
                bad(format!("lasso alpha must be > 0, got {alpha}"))
            }
            ModelSpec::Lasso { tol, max_iter, .. } if !(tol > 0.0) || max_iter == 0 => {
                bad("lasso tol must be > 0 and max_iter >= 1".into())
            }
            ModelSpec::Svr { c, .. } if !(c > 0.0 && c.is_finite()) => {
                bad(format!("svr C must be > 0, got {c}"))
            }
            ModelSpec::Svr { epsilon, .. } if !(epsilon >= 0.0 && epsilon.is_finite()) => {
                bad(format!("svr epsilon must be >= 0, got {epsilon}"))
            }
            ModelSpec::Svr {
                kernel: Kernel::Rbf { gamma: Some(g) },
                ..
            } if !(g > 0.0 && g.is_finite()) => bad(format!("rbf gamma must be > 0, got {g}")),
            ModelSpec::Tree { max_depth, .. } if max_depth < 1 => {
                bad("tree max_depth must be >= 1".into())
            }
            ModelSpec::Tree { min_leaf, .. } if min_leaf < 1 => {
                bad("tree min_leaf must be >= 1".into())
            }
            _ => Ok(()),
        }
    }

    /// Compact parameter text for tables, e.g. `alpha=1.9` or `C=2.8, epsilon=0.1`.
    pub fn params_label(&self) -> String {
        match *self {
            ModelSpec::Linear => "--".into(),
            ModelSpec::Ridge { alpha } | ModelSpec::Lasso { alpha, .. } => format!("alpha={alpha}"),
            ModelSpec::Svr { c, epsilon, kernel } => match kernel {
                Kernel::Linear => format!("C={c}, epsilon={epsilon}, kernel=linear"),
                Kernel::Rbf { gamma: None } => format!("C={c}, epsilon={epsilon}"),
                Kernel::Rbf { gamma: Some(g) } => format!("C={c}, epsilon={epsilon}, gamma={g}"),
            },
            ModelSpec::Tree {
                max_depth,
                min_leaf,
            } => {
                if min_leaf == 1 {
                    format!("max_depth={max_depth}")
                } else {
                    format!("max_depth={max_depth}, min_leaf={min_leaf}")
                }
            }
        }
    }
}

impl FromStr for ModelSpec {
    type Err = RegressError;

    /// Parses the JSON form, e.g. `{"family":"ridge","alpha":1.0}`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let spec: ModelSpec = serde_json::from_str(s)
            .map_err(|e| RegressError::InvalidParameter(format!("model spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "snake_case")]
pub enum ModelState {
    Linear(LinearModel),
    Svr(SvrModel),
    Tree(TreeModel),
}

/// A trained regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub n_features: usize,
    pub state: ModelState,
}

/// Version tag of the JSON model document.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    model: FittedModel,
}

impl FittedModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>, RegressError> {
        if x.ncols() != self.n_features {
            return Err(RegressError::WidthMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        Ok(match &self.state {
            ModelState::Linear(m) => m.predict(x),
            ModelState::Svr(m) => m.predict(x),
            ModelState::Tree(m) => m.predict(x),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, RegressError> {
        let doc: ModelDocument = serde_json::from_str(s)
            .map_err(|e| RegressError::InvalidParameter(format!("model document: {e}")))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(RegressError::InvalidParameter(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        Ok(doc.model)
    }
}

pub(crate) fn check_shapes(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<(), RegressError> {
    if x.nrows() != y.len() {
        return Err(RegressError::LengthMismatch {
            rows: x.nrows(),
            targets: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(RegressError::TooFewRows { needed: 1, got: 0 });
    }
    Ok(())
}

/// Fits `spec` on `(x, y)` with an intercept.
pub fn fit(
    spec: &ModelSpec,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
) -> Result<FittedModel, RegressError> {
    spec.validate()?;
    check_shapes(x, y)?;
    let state = match *spec {
        ModelSpec::Linear => ModelState::Linear(fit_linear(x, y, true, true)?),
        ModelSpec::Ridge { alpha } => ModelState::Linear(fit_ridge(x, y, alpha, true)),
        ModelSpec::Lasso {
            alpha,
            tol,
            max_iter,
        } => ModelState::Linear(fit_lasso(x, y, alpha, tol, max_iter)?),
        ModelSpec::Svr { c, epsilon, kernel } => {
            ModelState::Svr(fit_svr(x, y, c, epsilon, kernel)?)
        }
        ModelSpec::Tree {
            max_depth,
            min_leaf,
        } => ModelState::Tree(fit_tree(x, y, max_depth, min_leaf)),
    };
    Ok(FittedModel {
        spec: *spec,
        n_features: x.ncols(),
        state,
    })
}

pub fn predict(model: &FittedModel, x: ArrayView2<'_, f64>) -> Result<Array1<f64>, RegressError> {
    model.predict(x)
}

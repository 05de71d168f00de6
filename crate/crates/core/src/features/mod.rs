//! The 93-variable design matrix: calendar numerics, calendar indicators,
//! daily weather and historical TTI lags.

mod calendar;
mod poly;
mod scale;

use std::fmt::Write as _;
use std::str::FromStr;

use chrono::{Duration, NaiveDateTime};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{JoinedRecord, TtiObservation, WEATHER_COLUMNS, WEATHER_SCHEMA};

pub use calendar::{calendar_features, indicator_features, indicator_names, CALENDAR_NAMES};
pub use poly::{expanded_width, PolyPlan, MAX_DEGREE};
pub use scale::Scaler;

pub const LAG_COUNT: usize = 11;
pub const FEATURE_COUNT: usize = 5 + calendar::INDICATOR_COUNT + WEATHER_COLUMNS + LAG_COUNT;
/// Default upper bound on the width of a polynomial expansion.
pub const DEFAULT_EXPANSION_CAP: usize = 20_000;
/// Minimum number of rows `assemble` must produce.
pub const MIN_ROWS: usize = 100;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("lag timestamp {0} is not in the series")]
    MissingLag(NaiveDateTime),
    #[error("only {rows} rows have a complete lag history (need {MIN_ROWS})")]
    TooFewRows { rows: usize },
    #[error("polynomial degree {0} is outside 1..={MAX_DEGREE}")]
    DegreeOutOfRange(u32),
    #[error("expansion width {width} exceeds the cap of {cap} columns")]
    ExpansionTooLarge { width: usize, cap: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
}

/// Which lag set is available to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionCase {
    /// History up to one hour before the predicted hour.
    ShortTerm,
    /// History up to one day before the predicted hour.
    LongTerm,
}

impl PredictionCase {
    pub const SHORT_LAGS: [i64; LAG_COUNT] = [1, 2, 3, 4, 5, 6, 24, 48, 72, 168, 336];
    pub const LONG_LAGS: [i64; LAG_COUNT] = [24, 25, 26, 48, 72, 96, 120, 144, 168, 336, 504];

    pub fn lags(self) -> [i64; LAG_COUNT] {
        match self {
            PredictionCase::ShortTerm => Self::SHORT_LAGS,
            PredictionCase::LongTerm => Self::LONG_LAGS,
        }
    }

    pub fn min_lag(self) -> i64 {
        self.lags()[0]
    }

    pub fn max_lag(self) -> i64 {
        self.lags()[LAG_COUNT - 1]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PredictionCase::ShortTerm => "short_term",
            PredictionCase::LongTerm => "long_term",
        }
    }
}

impl FromStr for PredictionCase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "short" | "short_term" => Ok(PredictionCase::ShortTerm),
            "long" | "long_term" => Ok(PredictionCase::LongTerm),
            _ => Err(format!("unknown case `{s}` (expected short or long)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Calendar,
    Indicator,
    Weather,
    Lag,
}

/// Column names and groups of the 93-variable matrix for one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
    pub groups: Vec<FeatureGroup>,
    pub case: PredictionCase,
}

impl FeatureSchema {
    pub fn for_case(case: PredictionCase) -> Self {
        let mut names: Vec<String> = CALENDAR_NAMES.iter().map(|s| s.to_string()).collect();
        let mut groups = vec![FeatureGroup::Calendar; 5];
        let ind = indicator_names();
        groups.extend(std::iter::repeat_n(FeatureGroup::Indicator, ind.len()));
        names.extend(ind);
        names.extend(WEATHER_SCHEMA.iter().map(|s| s.to_string()));
        groups.extend(std::iter::repeat_n(FeatureGroup::Weather, WEATHER_COLUMNS));
        names.extend(case.lags().iter().map(|l| lag_name(*l)));
        groups.extend(std::iter::repeat_n(FeatureGroup::Lag, LAG_COUNT));
        Self {
            names,
            groups,
            case,
        }
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }
}

pub fn lag_name(hours: i64) -> String {
    format!("lag_{hours}h")
}

/// Hourly TTI values addressable by timestamp.
#[derive(Debug, Clone)]
pub struct HourlySeries {
    start: NaiveDateTime,
    values: Vec<Option<f64>>,
}

impl HourlySeries {
    /// Builds from hour-aligned points; later duplicates overwrite earlier ones.
    pub fn new<I: IntoIterator<Item = (NaiveDateTime, f64)>>(points: I) -> Self {
        let pts: Vec<(NaiveDateTime, f64)> = points.into_iter().collect();
        let Some(start) = pts.iter().map(|p| p.0).min() else {
            return Self {
                start: NaiveDateTime::MIN,
                values: Vec::new(),
            };
        };
        let end = pts.iter().map(|p| p.0).max().expect("non-empty");
        let len = (end - start).num_hours() as usize + 1;
        let mut values = vec![None; len];
        for (t, v) in pts {
            values[(t - start).num_hours() as usize] = Some(v);
        }
        Self { start, values }
    }

    pub fn from_observations(obs: &[TtiObservation]) -> Self {
        Self::new(obs.iter().map(|o| (o.timestamp, o.tti)))
    }

    pub fn get(&self, t: NaiveDateTime) -> Option<f64> {
        if t < self.start {
            return None;
        }
        let idx = (t - self.start).num_hours();
        self.values.get(idx as usize).copied().flatten()
    }
}

/// The case's 11 lagged TTI values for hour `t`, in [`PredictionCase::lags`] order.
pub fn lag_features(
    series: &HourlySeries,
    t: NaiveDateTime,
    case: PredictionCase,
) -> Result<[f64; LAG_COUNT], FeatureError> {
    let mut out = [0.0; LAG_COUNT];
    for (slot, lag) in out.iter_mut().zip(case.lags()) {
        let at = t - Duration::hours(lag);
        *slot = series.get(at).ok_or(FeatureError::MissingLag(at))?;
    }
    Ok(out)
}

/// Row-aligned feature matrix, target vector and column names.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub names: Vec<String>,
    pub timestamps: Vec<NaiveDateTime>,
}

impl DesignMatrix {
    pub fn new(
        x: Array2<f64>,
        y: Array1<f64>,
        names: Vec<String>,
        timestamps: Vec<NaiveDateTime>,
    ) -> Result<Self, FeatureError> {
        if x.ncols() != names.len() {
            return Err(FeatureError::Shape(format!(
                "{} columns but {} names",
                x.ncols(),
                names.len()
            )));
        }
        if x.nrows() != y.len() || (!timestamps.is_empty() && timestamps.len() != y.len()) {
            return Err(FeatureError::Shape(format!(
                "{} rows, {} targets, {} timestamps",
                x.nrows(),
                y.len(),
                timestamps.len()
            )));
        }
        if let Some(((row, col), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(FeatureError::NonFinite { row, col });
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite { row, col: x.ncols() });
        }
        Ok(Self {
            x,
            y,
            names,
            timestamps,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            names: self.names.clone(),
            timestamps: if self.timestamps.is_empty() {
                Vec::new()
            } else {
                rows.iter().map(|&r| self.timestamps[r]).collect()
            },
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> DesignMatrix {
        DesignMatrix {
            x: self.x.select(Axis(1), cols),
            y: self.y.clone(),
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            timestamps: self.timestamps.clone(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Column indexes for `names`, in the given order.
    pub fn column_indexes(&self, names: &[String]) -> Result<Vec<usize>, FeatureError> {
        names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| FeatureError::UnknownColumn(n.clone()))
            })
            .collect()
    }

    /// CSV with a `timestamp,<columns...>,tti` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("timestamp");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push_str(",tti\n");
        for (i, row) in self.x.rows().into_iter().enumerate() {
            match self.timestamps.get(i) {
                Some(t) => {
                    let _ = write!(out, "{}", t.format("%Y-%m-%dT%H:%M:%S"));
                }
                None => {}
            }
            for v in row {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", self.y[i]);
        }
        out
    }
}

/// Builds the 93-column matrix. Rows without a complete lag history are
/// skipped; the target is each row's own TTI.
pub fn assemble(
    records: &[JoinedRecord],
    case: PredictionCase,
) -> Result<DesignMatrix, FeatureError> {
    let schema = FeatureSchema::for_case(case);
    let series = HourlySeries::new(records.iter().map(|r| (r.timestamp, r.tti)));
    let mut data: Vec<f64> = Vec::with_capacity(records.len() * FEATURE_COUNT);
    let mut y = Vec::with_capacity(records.len());
    let mut timestamps = Vec::with_capacity(records.len());
    for r in records {
        let Ok(lags) = lag_features(&series, r.timestamp, case) else {
            continue;
        };
        data.extend(calendar_features(r.timestamp));
        data.extend(indicator_features(r.timestamp));
        data.extend(r.weather);
        data.extend(lags);
        y.push(r.tti);
        timestamps.push(r.timestamp);
    }
    if y.len() < MIN_ROWS {
        return Err(FeatureError::TooFewRows { rows: y.len() });
    }
    let x = Array2::from_shape_vec((y.len(), FEATURE_COUNT), data)
        .map_err(|e| FeatureError::Shape(e.to_string()))?;
    DesignMatrix::new(x, Array1::from(y), schema.names, timestamps)
}

/// Expands every column into all monomials of total degree `<= degree`,
/// including the constant column `1`.
pub fn polynomial_expand(
    matrix: &DesignMatrix,
    degree: u32,
    cap: usize,
) -> Result<DesignMatrix, FeatureError> {
    let plan = checked_plan(matrix.n_cols(), degree, cap)?;
    Ok(DesignMatrix {
        x: plan.expand(matrix.x.view()),
        y: matrix.y.clone(),
        names: plan.names(&matrix.names),
        timestamps: matrix.timestamps.clone(),
    })
}

pub fn checked_plan(p: usize, degree: u32, cap: usize) -> Result<PolyPlan, FeatureError> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(FeatureError::DegreeOutOfRange(degree));
    }
    let width = expanded_width(p, degree);
    if width > cap {
        return Err(FeatureError::ExpansionTooLarge { width, cap });
    }
    Ok(PolyPlan::new(p, degree))
}

/// Standardizes every non-constant column to mean 0 and sample variance 1.
pub fn standardize(matrix: &DesignMatrix) -> Result<(DesignMatrix, Scaler), FeatureError> {
    if matrix.n_rows() < 2 {
        return Err(FeatureError::TooFewRows {
            rows: matrix.n_rows(),
        });
    }
    let scaler = Scaler::fit(matrix.x.view());
    let x = scaler.transform(matrix.x.view());
    Ok((
        DesignMatrix {
            x,
            y: matrix.y.clone(),
            names: matrix.names.clone(),
            timestamps: matrix.timestamps.clone(),
        },
        scaler,
    ))
}

/// True when every column has |mean| and |variance - 1| within `tol`, or is
/// constant.
pub fn looks_standardized(x: ArrayView2<'_, f64>, tol: f64) -> bool {
    let n = x.nrows();
    if n < 2 {
        return false;
    }
    x.axis_iter(Axis(1)).all(|col| {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        var <= 1e-20 || ((var - 1.0).abs() <= tol && mean.abs() <= tol)
    })
}

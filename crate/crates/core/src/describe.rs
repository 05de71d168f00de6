//! Descriptive TTI aggregations and plot-data files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Timelike};
use serde::Serialize;
use thiserror::Error;

use crate::ingest::JoinedRecord;

#[derive(Debug, Error)]
pub enum DescribeError {
    #[error("no records to aggregate")]
    EmptyInput,
    #[error("writing {path}: {source}")]
    IoFailure {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyKind {
    Day,
    Month,
    Hour,
    Weekday,
    Year,
}

impl KeyKind {
    /// Plot-data file written for this key kind.
    pub fn file_name(self) -> &'static str {
        match self {
            KeyKind::Day => "fig1_daily.csv",
            KeyKind::Month => "fig2_monthly.csv",
            KeyKind::Hour => "fig3_hourly.csv",
            KeyKind::Weekday => "fig4_weekday.csv",
            KeyKind::Year => "fig5_yearly.csv",
        }
    }

    fn key_of(self, r: &JoinedRecord) -> Key {
        let t = r.timestamp;
        match self {
            KeyKind::Day => Key::Date(t.date()),
            KeyKind::Month => Key::Int(t.month() as i32),
            KeyKind::Hour => Key::Int(t.hour() as i32),
            // Sunday = 0 .. Saturday = 6
            KeyKind::Weekday => Key::Int(t.weekday().num_days_from_sunday() as i32),
            KeyKind::Year => Key::Int(t.year()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(untagged)]
pub enum Key {
    Int(i32),
    Date(NaiveDate),
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Key::Int(v) => write!(f, "{v}"),
            Key::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
        }
    }
}

/// How records are partitioned by their day's precipitation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitRule {
    /// `wet` when daily precipitation is above zero, `dry` otherwise.
    WetDry,
    /// `high` when daily precipitation is at least the 75th percentile of wet
    /// days in the input, `low` otherwise.
    HighLow,
    /// `high` when daily precipitation is at least this threshold.
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub key: Key,
    pub mean_tti: f64,
    pub count: usize,
    /// Whether the day had snowfall. Only filled for daily series.
    pub snow: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateSeries {
    pub key_kind: KeyKind,
    pub split: Option<&'static str>,
    pub points: Vec<SeriesPoint>,
}

impl AggregateSeries {
    pub fn point(&self, key: i32) -> Option<&SeriesPoint> {
        self.points.iter().find(|p| p.key == Key::Int(key))
    }

    pub fn total_count(&self) -> usize {
        self.points.iter().map(|p| p.count).sum()
    }

    /// Key of the point with the largest mean.
    pub fn argmax(&self) -> Option<Key> {
        self.points
            .iter()
            .max_by(|a, b| a.mean_tti.total_cmp(&b.mean_tti))
            .map(|p| p.key)
    }

    pub fn argmin(&self) -> Option<Key> {
        self.points
            .iter()
            .min_by(|a, b| a.mean_tti.total_cmp(&b.mean_tti))
            .map(|p| p.key)
    }
}

/// Linear-interpolated percentile of `values` (`q` in 0..=1).
fn percentile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = q * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (values[hi] - values[lo]) * (pos - lo as f64)
}

/// 75th percentile of daily precipitation over wet days, or `None` without wet days.
pub fn high_precipitation_threshold(records: &[JoinedRecord]) -> Option<f64> {
    let mut daily: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for r in records {
        daily.insert(r.date(), r.precipitation());
    }
    let mut wet: Vec<f64> = daily.into_values().filter(|p| *p > 0.0).collect();
    if wet.is_empty() {
        None
    } else {
        Some(percentile(&mut wet, 0.75))
    }
}

fn build_series(
    records: &[&JoinedRecord],
    key_kind: KeyKind,
    split: Option<&'static str>,
) -> AggregateSeries {
    let mut acc: BTreeMap<Key, (f64, usize, bool)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(key_kind.key_of(r)).or_insert((0.0, 0, false));
        e.0 += r.tti;
        e.1 += 1;
        e.2 |= r.snowfall() > 0.0;
    }
    let points = acc
        .into_iter()
        .map(|(key, (sum, count, snow))| SeriesPoint {
            key,
            mean_tti: sum / count as f64,
            count,
            snow: (key_kind == KeyKind::Day).then_some(snow),
        })
        .collect();
    AggregateSeries {
        key_kind,
        split,
        points,
    }
}

/// Mean TTI per key. With a split rule the records are partitioned by daily
/// precipitation into two series (`wet`/`dry` or `high`/`low`), the first
/// being the rainier one.
pub fn aggregate_mean(
    records: &[JoinedRecord],
    key_kind: KeyKind,
    split_rule: Option<SplitRule>,
) -> Result<Vec<AggregateSeries>, DescribeError> {
    if records.is_empty() {
        return Err(DescribeError::EmptyInput);
    }
    let Some(rule) = split_rule else {
        let all: Vec<&JoinedRecord> = records.iter().collect();
        return Ok(vec![build_series(&all, key_kind, None)]);
    };
    let (labels, is_upper): ((&'static str, &'static str), Box<dyn Fn(f64) -> bool>) = match rule
    {
        SplitRule::WetDry => (("wet", "dry"), Box::new(|p| p > 0.0)),
        SplitRule::HighLow => {
            // without wet days nothing qualifies as high
            let t = high_precipitation_threshold(records).unwrap_or(f64::INFINITY);
            (("high", "low"), Box::new(move |p| p >= t))
        }
        SplitRule::Threshold(t) => (("high", "low"), Box::new(move |p| p >= t)),
    };
    let (upper, lower): (Vec<&JoinedRecord>, Vec<&JoinedRecord>) =
        records.iter().partition(|r| is_upper(r.precipitation()));
    Ok(vec![
        build_series(&upper, key_kind, Some(labels.0)),
        build_series(&lower, key_kind, Some(labels.1)),
    ])
}

/// The standard figure set: daily, monthly, hourly split wet/dry, weekday
/// split high/low precipitation, yearly.
pub fn standard_series(records: &[JoinedRecord]) -> Result<Vec<AggregateSeries>, DescribeError> {
    let mut out = Vec::new();
    out.extend(aggregate_mean(records, KeyKind::Day, None)?);
    out.extend(aggregate_mean(records, KeyKind::Month, None)?);
    out.extend(aggregate_mean(records, KeyKind::Hour, Some(SplitRule::WetDry))?);
    out.extend(aggregate_mean(records, KeyKind::Weekday, Some(SplitRule::HighLow))?);
    out.extend(aggregate_mean(records, KeyKind::Year, None)?);
    Ok(out)
}

/// Writes one CSV per key kind present in `series` into `dir`.
///
/// Columns are `key,mean_tti,count`, plus `split` when the series is split and
/// `snow` for the daily file. Returns the written paths.
pub fn emit_report(series: &[AggregateSeries], dir: &Path) -> Result<Vec<PathBuf>, DescribeError> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(DescribeError::EmptyInput);
    }
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DescribeError::IoFailure { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let kinds: BTreeSet<u8> = series.iter().map(|s| s.key_kind as u8).collect();
    let mut written = Vec::new();
    for kind in kinds {
        let group: Vec<&AggregateSeries> =
            series.iter().filter(|s| s.key_kind as u8 == kind).collect();
        let key_kind = group[0].key_kind;
        let with_split = group.iter().any(|s| s.split.is_some());
        let with_snow = key_kind == KeyKind::Day;
        let mut text = String::from("key,mean_tti,count");
        if with_split {
            text.push_str(",split");
        }
        if with_snow {
            text.push_str(",snow");
        }
        text.push('\n');
        for s in &group {
            for p in &s.points {
                text.push_str(&format!("{},{},{}", p.key, p.mean_tti, p.count));
                if with_split {
                    text.push(',');
                    text.push_str(s.split.unwrap_or(""));
                }
                if with_snow {
                    text.push_str(if p.snow == Some(true) { ",1" } else { ",0" });
                }
                text.push('\n');
            }
        }
        let path = dir.join(key_kind.file_name());
        fs::write(&path, text).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

//! Parsing, validation and joining of hourly TTI and daily weather records.

mod schema;
mod synth;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use thiserror::Error;

pub use schema::{column_index, WEATHER_COLUMNS, WEATHER_SCHEMA};
pub(crate) use schema::{EVENTS, PRECIPITATION_TOTAL, SNOWFALL, SNOW_DEPTH, TRIPLES};
pub use synth::{synthesize_dataset, SyntheticDataset};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: timestamp {timestamp} is not aligned to the hour")]
    NonHourAligned { line: usize, timestamp: NaiveDateTime },
    #[error("line {line}: TTI {value} is below 1.0")]
    TtiBelowOne { line: usize, value: f64 },
    #[error("line {line}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp { line: usize, timestamp: NaiveDateTime },
    #[error("missing weather column `{0}`")]
    MissingColumn(String),
    #[error("weather column `{0}` has no values to impute from")]
    EmptyColumn(String),
    #[error("line {line}: duplicate date {date}")]
    DuplicateDate { line: usize, date: NaiveDate },
    #[error("line {line}: column `{column}`: {reason}")]
    InvalidValue {
        line: usize,
        column: &'static str,
        reason: String,
    },
    #[error("no TTI timestamp falls on a date with weather data")]
    EmptyIntersection,
    #[error("invalid date range: {start} is not before {end}")]
    InvalidRange { start: NaiveDate, end: NaiveDate },
}

/// One hourly network TTI reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtiObservation {
    pub timestamp: NaiveDateTime,
    pub tti: f64,
}

/// One day of weather indexes in [`WEATHER_SCHEMA`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherDay {
    pub date: NaiveDate,
    pub indexes: [f64; WEATHER_COLUMNS],
    /// Schema positions whose value was imputed from the column median.
    pub imputed: Vec<usize>,
}

impl WeatherDay {
    pub fn precipitation(&self) -> f64 {
        self.indexes[PRECIPITATION_TOTAL]
    }

    pub fn snowfall(&self) -> f64 {
        self.indexes[SNOWFALL]
    }

    pub fn is_imputed(&self) -> bool {
        !self.imputed.is_empty()
    }

    /// Checks the schema invariants. `line` is only used for error reporting.
    pub fn validate(&self, line: usize) -> Result<(), IngestError> {
        let v = &self.indexes;
        let bad = |col: usize, reason: String| IngestError::InvalidValue {
            line,
            column: WEATHER_SCHEMA[col],
            reason,
        };
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(bad(i, "not a finite number".into()));
        }
        for col in [PRECIPITATION_TOTAL, SNOWFALL, SNOW_DEPTH] {
            if v[col] < 0.0 {
                return Err(bad(col, format!("{} is negative", v[col])));
            }
        }
        for t in TRIPLES {
            if !(v[t] <= v[t + 1] && v[t + 1] <= v[t + 2]) {
                return Err(bad(
                    t + 1,
                    format!("min/mean/max out of order: {}, {}, {}", v[t], v[t + 1], v[t + 2]),
                ));
            }
        }
        for col in EVENTS {
            if v[col] != 0.0 && v[col] != 1.0 {
                return Err(bad(col, format!("event indicator {} is not 0 or 1", v[col])));
            }
        }
        Ok(())
    }
}

/// A TTI observation with the weather of its calendar date attached.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedRecord {
    pub timestamp: NaiveDateTime,
    pub tti: f64,
    pub weather: [f64; WEATHER_COLUMNS],
}

impl JoinedRecord {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }

    pub fn precipitation(&self) -> f64 {
        self.weather[PRECIPITATION_TOTAL]
    }

    pub fn snowfall(&self) -> f64 {
        self.weather[SNOWFALL]
    }
}

#[derive(Debug, Clone)]
pub struct JoinOutcome {
    pub records: Vec<JoinedRecord>,
    /// Observations whose date had no weather record.
    pub dropped: usize,
}

const TIMESTAMP_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
];

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

/// Parses a `timestamp,tti` file. Output is sorted by timestamp.
pub fn parse_tti_csv(text: &str) -> Result<Vec<TtiObservation>, IngestError> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(|e| IngestError::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    let ts_col = headers.iter().position(|h| h == "timestamp");
    let tti_col = headers.iter().position(|h| h == "tti");
    let (ts_col, tti_col) = match (ts_col, tti_col) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(IngestError::MalformedRow {
                line: 1,
                reason: "header must contain `timestamp` and `tti`".into(),
            })
        }
    };

    let mut by_time: BTreeMap<NaiveDateTime, f64> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| IngestError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        let field = |c: usize| row.get(c).unwrap_or("");
        let timestamp =
            parse_timestamp(field(ts_col)).ok_or_else(|| IngestError::MalformedRow {
                line,
                reason: format!("bad timestamp `{}`", field(ts_col)),
            })?;
        let tti: f64 = field(tti_col)
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| IngestError::MalformedRow {
                line,
                reason: format!("bad tti `{}`", field(tti_col)),
            })?;
        if timestamp.minute() != 0 || timestamp.second() != 0 || timestamp.nanosecond() != 0 {
            return Err(IngestError::NonHourAligned { line, timestamp });
        }
        if tti < 1.0 {
            return Err(IngestError::TtiBelowOne { line, value: tti });
        }
        if by_time.insert(timestamp, tti).is_some() {
            return Err(IngestError::DuplicateTimestamp { line, timestamp });
        }
    }
    Ok(by_time
        .into_iter()
        .map(|(timestamp, tti)| TtiObservation { timestamp, tti })
        .collect())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Parses a daily weather file with a `date` column and all 34 schema columns.
///
/// Empty or `NA` cells are replaced by the column median over the file and the
/// record is flagged. Imputed triple members are clamped against their present
/// siblings and imputed event indicators are rounded to 0/1.
pub fn parse_weather_csv(text: &str) -> Result<Vec<WeatherDay>, IngestError> {
    let mut rdr = reader(text);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let date_col = headers
        .iter()
        .position(|h| h == "date")
        .ok_or_else(|| IngestError::MissingColumn("date".into()))?;
    let mut cols = [0usize; WEATHER_COLUMNS];
    for (k, name) in WEATHER_SCHEMA.iter().enumerate() {
        cols[k] = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| IngestError::MissingColumn((*name).to_string()))?;
    }

    let mut rows: Vec<(usize, NaiveDate, [Option<f64>; WEATHER_COLUMNS])> = Vec::new();
    let mut seen: HashMap<NaiveDate, usize> = HashMap::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| IngestError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        let raw_date = row.get(date_col).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
            IngestError::MalformedRow {
                line,
                reason: format!("bad date `{raw_date}`"),
            }
        })?;
        if seen.insert(date, line).is_some() {
            return Err(IngestError::DuplicateDate { line, date });
        }
        let mut values = [None; WEATHER_COLUMNS];
        for (k, &c) in cols.iter().enumerate() {
            let cell = row.get(c).unwrap_or("");
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| IngestError::MalformedRow {
                line,
                reason: format!("column `{}`: bad number `{cell}`", WEATHER_SCHEMA[k]),
            })?;
            values[k] = Some(v);
        }
        rows.push((line, date, values));
    }

    let mut medians = [0.0; WEATHER_COLUMNS];
    for k in 0..WEATHER_COLUMNS {
        if rows.iter().all(|r| r.2[k].is_some()) {
            continue;
        }
        let mut present: Vec<f64> = rows.iter().filter_map(|r| r.2[k]).collect();
        if present.is_empty() {
            return Err(IngestError::EmptyColumn(WEATHER_SCHEMA[k].to_string()));
        }
        medians[k] = median(&mut present);
    }

    let mut days = Vec::with_capacity(rows.len());
    for (line, date, values) in rows {
        let mut indexes = [0.0; WEATHER_COLUMNS];
        let mut imputed = Vec::new();
        for k in 0..WEATHER_COLUMNS {
            match values[k] {
                Some(v) => indexes[k] = v,
                None => {
                    indexes[k] = medians[k];
                    imputed.push(k);
                }
            }
        }
        for &k in &imputed {
            if EVENTS.contains(&k) {
                indexes[k] = if indexes[k] >= 0.5 { 1.0 } else { 0.0 };
            }
            if let Some(&t) = TRIPLES.iter().find(|&&t| (t..t + 3).contains(&k)) {
                let present = |j: usize| values[j];
                let v = indexes[k];
                indexes[k] = match k - t {
                    0 => [present(t + 1), present(t + 2)]
                        .into_iter()
                        .flatten()
                        .fold(v, f64::min),
                    1 => {
                        let lo = present(t).unwrap_or(f64::NEG_INFINITY);
                        let hi = present(t + 2).unwrap_or(f64::INFINITY);
                        v.max(lo).min(hi)
                    }
                    _ => [present(t), present(t + 1)]
                        .into_iter()
                        .flatten()
                        .fold(v, f64::max),
                };
            }
        }
        let day = WeatherDay {
            date,
            indexes,
            imputed,
        };
        day.validate(line)?;
        days.push(day);
    }
    days.sort_by_key(|d| d.date);
    Ok(days)
}

/// Attaches each observation's daily weather. Observations on dates without a
/// weather record are dropped and counted.
pub fn join_tti_weather(
    tti: &[TtiObservation],
    weather: &[WeatherDay],
) -> Result<JoinOutcome, IngestError> {
    let by_date: HashMap<NaiveDate, &WeatherDay> = weather.iter().map(|w| (w.date, w)).collect();
    let mut records = Vec::with_capacity(tti.len());
    let mut dropped = 0;
    for obs in tti {
        match by_date.get(&obs.timestamp.date()) {
            Some(day) => records.push(JoinedRecord {
                timestamp: obs.timestamp,
                tti: obs.tti,
                weather: day.indexes,
            }),
            None => dropped += 1,
        }
    }
    if records.is_empty() {
        return Err(IngestError::EmptyIntersection);
    }
    records.sort_by_key(|r| r.timestamp);
    Ok(JoinOutcome { records, dropped })
}

pub fn write_tti_csv(obs: &[TtiObservation]) -> String {
    let mut out = String::with_capacity(obs.len() * 28 + 16);
    out.push_str("timestamp,tti\n");
    for o in obs {
        let _ = writeln!(out, "{},{}", o.timestamp.format("%Y-%m-%dT%H:%M:%S"), o.tti);
    }
    out
}

pub fn write_weather_csv(days: &[WeatherDay]) -> String {
    let mut out = String::with_capacity(days.len() * 400 + 600);
    out.push_str("date");
    for name in WEATHER_SCHEMA {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for d in days {
        let _ = write!(out, "{}", d.date.format("%Y-%m-%d"));
        for v in d.indexes {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

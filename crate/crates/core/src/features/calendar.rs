//! Calendar numerics and one-hot indicators.

use chrono::{Datelike, NaiveDateTime, Timelike};

pub const CALENDAR_NAMES: [&str; 5] = ["hour", "day", "weekday", "month", "year"];
pub const INDICATOR_COUNT: usize = 24 + 7 + 12;

/// `(hour 0-23, day of month 1-31, weekday 0-6 Sunday first, month 1-12, year)`.
pub fn calendar_features(t: NaiveDateTime) -> [f64; 5] {
    [
        t.hour() as f64,
        t.day() as f64,
        t.weekday().num_days_from_sunday() as f64,
        t.month() as f64,
        t.year() as f64,
    ]
}

/// One-hot hour (24), weekday (7) and month (12) indicators.
pub fn indicator_features(t: NaiveDateTime) -> [f64; INDICATOR_COUNT] {
    let mut v = [0.0; INDICATOR_COUNT];
    v[t.hour() as usize] = 1.0;
    v[24 + t.weekday().num_days_from_sunday() as usize] = 1.0;
    v[31 + t.month0() as usize] = 1.0;
    v
}

pub fn indicator_names() -> Vec<String> {
    let mut names = Vec::with_capacity(INDICATOR_COUNT);
    names.extend((0..24).map(|h| format!("hour_{h:02}")));
    names.extend((0..7).map(|d| format!("weekday_{d}")));
    names.extend((1..=12).map(|m| format!("month_{m:02}")));
    names
}

//! Seeded synthetic TTI and weather generator.
//!
//! Hourly TTI is composed as
//!
//! ```text
//! tti = 1 + max(0, base + hourly profile + weekday effect + month effect
//!                  + precipitation uplift + visibility uplift + snow spike
//!                  + AR(1) disturbance + white noise)
//! ```
//!
//! Calibration targets for the aggregate patterns: hourly means peak at 08:00
//! and 17:00, weekday means are highest on Wednesday and lowest on Saturday,
//! the June monthly mean is the largest, and wet days run above dry days.
//! The hourly AR(1) disturbance is what makes recent lags informative; its
//! persistence decays to almost nothing after a day.

use std::f64::consts::PI;

use chrono::{Datelike, Duration, NaiveDate, Timelike};
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::schema::*;
use super::{IngestError, TtiObservation, WeatherDay};
use crate::rng::{rng_from, stream};

const BASE: f64 = 0.2;
const AR_PHI: f64 = 0.93;
const AR_SD: f64 = 0.24;
const NOISE_SD: f64 = 0.025;
/// Probability that an hour is missing from the feed.
const GAP_RATE: f64 = 0.001_15;

/// Sunday-first additive weekday effect.
const WEEKDAY_EFFECT: [f64; 7] = [-0.04, 0.0, 0.02, 0.06, 0.03, 0.005, -0.07];
/// January-first additive month effect.
const MONTH_EFFECT: [f64; 12] = [
    -0.05, -0.045, 0.0, 0.02, 0.045, 0.11, 0.01, -0.02, 0.03, 0.045, 0.02, -0.01,
];

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub tti: Vec<TtiObservation>,
    pub weather: Vec<WeatherDay>,
}

fn bump(h: f64, centre: f64, width: f64) -> f64 {
    let z = (h - centre) / width;
    (-0.5 * z * z).exp()
}

/// Mean congestion by hour of day, before any other effect.
pub(crate) fn hourly_profile(hour: u32, weekend: bool) -> f64 {
    let h = hour as f64;
    if weekend {
        0.16 * bump(h, 13.5, 3.5)
    } else {
        0.42 * bump(h, 8.0, 1.2) + 0.52 * bump(h, 17.2, 1.5) + 0.12 * bump(h, 12.5, 3.0)
    }
}

/// Generates hourly TTI and daily weather for every day in `start..=end`.
///
/// A small seeded fraction of hours is left out to mimic feed gaps.
pub fn synthesize_dataset(
    start: NaiveDate,
    end: NaiveDate,
    seed: u64,
) -> Result<SyntheticDataset, IngestError> {
    if start >= end {
        return Err(IngestError::InvalidRange { start, end });
    }
    let weather = synth_weather(start, end, seed);
    let tti = synth_tti(&weather, seed);
    Ok(SyntheticDataset { tti, weather })
}

fn synth_weather(start: NaiveDate, end: NaiveDate, seed: u64) -> Vec<WeatherDay> {
    let mut rng = rng_from(seed, &[stream::SYNTH, 0]);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let rain_amount = Exp::new(1.0 / 0.35).expect("positive rate");

    let mut days = Vec::new();
    let mut wet = false;
    let mut snow_depth: f64 = 0.0;
    let mut prev_pressure = 30.0;
    let mut date = start;
    while date <= end {
        let doy = date.ordinal() as f64;
        let season = (2.0 * PI * (doy - 200.0) / 365.25).cos();

        let p_wet = if wet { 0.5 } else { 0.25 };
        wet = rng.random::<f64>() < p_wet;

        let t_mean = 56.0 + 22.0 * season + 6.0 * normal.sample(&mut rng);
        let spread = 6.0 + 5.0 * rng.random::<f64>();
        let t_min = t_mean - spread * (0.8 + 0.4 * rng.random::<f64>());
        let t_max = t_mean + spread * (0.8 + 0.4 * rng.random::<f64>());

        let precip = if wet { rain_amount.sample(&mut rng) } else { 0.0 };
        let snowfall = if wet && t_mean < 34.0 {
            precip * 10.0 * (0.6 + 0.6 * rng.random::<f64>())
        } else {
            0.0
        };
        let melt = if t_max > 40.0 { 0.5 } else { 0.9 };
        snow_depth = snow_depth * melt + snowfall;
        if snow_depth < 0.1 {
            snow_depth = 0.0;
        }

        let dp_mean = t_mean - if wet { 3.0 } else { 10.0 } - 5.0 * rng.random::<f64>();
        let dp_min = dp_mean - 2.0 - 4.0 * rng.random::<f64>();
        let dp_max = dp_mean + 2.0 + 4.0 * rng.random::<f64>();

        let hum_mean = (if wet { 80.0 } else { 60.0 } + 8.0 * normal.sample(&mut rng))
            .clamp(25.0, 98.0);
        let hum_min = (hum_mean - 10.0 - 15.0 * rng.random::<f64>()).max(5.0);
        let hum_max = (hum_mean + 5.0 + 10.0 * rng.random::<f64>()).min(100.0);

        let pr_mean = 30.0 - if wet { 0.2 } else { 0.0 } + 0.15 * normal.sample(&mut rng);
        let pr_min = pr_mean - 0.05 - 0.2 * rng.random::<f64>();
        let pr_max = pr_mean + 0.05 + 0.2 * rng.random::<f64>();

        let vis_mean = if wet {
            (9.0 - 2.5 * precip.min(2.0) - 2.0 * rng.random::<f64>()).max(0.5)
        } else {
            9.0 + rng.random::<f64>()
        };
        let vis_min = (vis_mean - (if wet { 4.0 } else { 2.0 }) * rng.random::<f64>()).max(0.1);
        let vis_max = 10.0;

        let wind_mean = (7.0 + if wet { 4.0 } else { 0.0 } + 2.0 * normal.sample(&mut rng))
            .max(0.5);
        let wind_min = wind_mean * (0.1 + 0.4 * rng.random::<f64>());
        let wind_max = wind_mean * (1.5 + rng.random::<f64>());
        let gust = wind_max * (1.2 + 0.4 * rng.random::<f64>());

        let cloud = if wet {
            6.0 + 2.0 * rng.random::<f64>()
        } else {
            6.0 * rng.random::<f64>()
        };
        let hdd = (65.0 - t_mean).max(0.0);
        let cdd = (t_mean - 65.0).max(0.0);
        let day_length = 12.2 + 2.4 * (2.0 * PI * (doy - 80.0) / 365.25).sin();
        let sunshine = day_length * (1.0 - cloud / 8.0);
        let precip_hourly = precip * (0.2 + 0.4 * rng.random::<f64>());
        let tendency = pr_mean - prev_pressure;
        prev_pressure = pr_mean;

        let thunder = wet && t_max > 75.0 && rng.random::<f64>() < 0.4;
        let hail = thunder && rng.random::<f64>() < 0.05;
        let flag = |b: bool| if b { 1.0 } else { 0.0 };

        let indexes = [
            t_min,
            t_mean,
            t_max,
            dp_min,
            dp_mean,
            dp_max,
            hum_min,
            hum_mean,
            hum_max,
            pr_min,
            pr_mean,
            pr_max,
            vis_min,
            vis_mean,
            vis_max,
            wind_min,
            wind_mean,
            wind_max,
            gust,
            precip,
            snowfall,
            snow_depth,
            cloud,
            hdd,
            cdd,
            sunshine,
            precip_hourly,
            tendency,
            flag(wet && snowfall == 0.0),
            flag(snowfall > 0.0),
            flag(vis_min < 1.0),
            flag(thunder),
            flag(hail),
            flag(gust > 35.0),
        ];
        days.push(WeatherDay {
            date,
            indexes,
            imputed: Vec::new(),
        });
        date += Duration::days(1);
    }
    days
}

fn synth_tti(weather: &[WeatherDay], seed: u64) -> Vec<TtiObservation> {
    let mut rng = rng_from(seed, &[stream::SYNTH, 1]);
    let mut gaps = rng_from(seed, &[stream::SYNTH, 2]);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let innovation_sd = AR_SD * (1.0 - AR_PHI * AR_PHI).sqrt();

    let mut ar = AR_SD * normal.sample(&mut rng);
    let mut out = Vec::with_capacity(weather.len() * 24);
    for day in weather {
        let weekday = day.date.weekday().num_days_from_sunday() as usize;
        let weekend = weekday == 0 || weekday == 6;
        let month = day.date.month0() as usize;
        let precip = day.indexes[PRECIPITATION_TOTAL];
        let snowfall = day.indexes[SNOWFALL];
        let depth = day.indexes[SNOW_DEPTH];
        let visibility = day.indexes[VISIBILITY_MEAN];

        for hour in 0..24 {
            let profile = hourly_profile(hour, weekend);
            let activity = 0.4 + 2.0 * profile;
            let wet = if precip > 0.0 {
                (0.03 + 0.08 * precip.min(1.5)) * activity
            } else {
                0.0
            };
            let vis = 0.012 * (10.0 - visibility) * activity;
            let snow = if snowfall > 0.0 {
                (0.15 + 0.08 * snowfall.min(6.0)) * activity
            } else if depth > 2.0 {
                0.05 * activity
            } else {
                0.0
            };
            ar = AR_PHI * ar + innovation_sd * normal.sample(&mut rng);
            let noise = NOISE_SD * normal.sample(&mut rng);
            let congestion = BASE
                + profile
                + WEEKDAY_EFFECT[weekday]
                + MONTH_EFFECT[month]
                + wet
                + vis
                + snow
                + ar
                + noise;

            if gaps.random::<f64>() < GAP_RATE {
                continue;
            }
            let timestamp = day.date.and_hms_opt(hour, 0, 0).expect("valid hour");
            debug_assert_eq!(timestamp.minute(), 0);
            out.push(TtiObservation {
                timestamp,
                tti: 1.0 + congestion.max(0.0),
            });
        }
    }
    out
}

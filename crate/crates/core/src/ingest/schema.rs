//! Fixed 34-column daily weather schema.
//!
//! Column order is part of the file format and of the design-matrix layout.

pub const WEATHER_COLUMNS: usize = 34;

pub const WEATHER_SCHEMA: [&str; WEATHER_COLUMNS] = [
    "temperature_min",
    "temperature_mean",
    "temperature_max",
    "dew_point_min",
    "dew_point_mean",
    "dew_point_max",
    "humidity_min",
    "humidity_mean",
    "humidity_max",
    "pressure_min",
    "pressure_mean",
    "pressure_max",
    "visibility_min",
    "visibility_mean",
    "visibility_max",
    "wind_speed_min",
    "wind_speed_mean",
    "wind_speed_max",
    "wind_gust_max",
    "precipitation_total",
    "snowfall",
    "snow_depth",
    "cloud_cover_mean",
    "heating_degree_days",
    "cooling_degree_days",
    "sunshine_hours",
    "precipitation_max_hourly",
    "pressure_tendency",
    "event_rain",
    "event_snow",
    "event_fog",
    "event_thunder",
    "event_hail",
    "event_high_wind",
];

/// Start index of each (min, mean, max) triple.
pub const TRIPLES: [usize; 6] = [0, 3, 6, 9, 12, 15];

pub const PRECIPITATION_TOTAL: usize = 19;
pub const SNOWFALL: usize = 20;
pub const SNOW_DEPTH: usize = 21;
pub const VISIBILITY_MEAN: usize = 13;

/// Event indicators occupy the last six columns.
pub const EVENTS: std::ops::Range<usize> = 28..34;

pub fn column_index(name: &str) -> Option<usize> {
    WEATHER_SCHEMA.iter().position(|c| *c == name)
}

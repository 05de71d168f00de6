//! Network travel-time-index (TTI) forecasting.
//!
//! The crate covers the whole modelling pipeline for hourly TTI series:
//!
//! - [`ingest`]: CSV parsing, validation, the TTI/weather join and a seeded
//!   synthetic dataset generator.
//! - [`describe`]: descriptive aggregations (daily, monthly, hourly, weekday,
//!   yearly means) and plot-data emission.
//! - [`features`]: the 93-variable design matrix, standardization and
//!   polynomial expansion.
//! - [`regress`]: linear, ridge, lasso, epsilon-SVR and CART regressors.
//! - [`select`]: recursive feature elimination.
//! - [`evaluate`]: R², k-fold cross-validation and repeated sampled CV.
//! - [`experiment`]: the model × parameter × subset size × degree grid and
//!   its best-per-model summary.
//!
//! With the default `parallel` feature, grid cells and CV repeats run on the
//! rayon pool. Without it every [`Parallelism`] mode runs sequentially; both
//! produce identical numbers.

pub mod describe;
pub mod evaluate;
pub mod experiment;
pub mod features;
pub mod ingest;
pub mod linalg;
pub mod par;
pub mod regress;
pub mod rng;
pub mod select;

pub use describe::{aggregate_mean, emit_report, AggregateSeries, KeyKind, SplitRule};
pub use evaluate::{
    cross_validate, kfold_split, r2_score, repeated_sampled_cv, CvScore, Preprocess,
    RepeatedCvScore,
};
pub use experiment::{best_per_model, run_grid, ExperimentResult, GridConfig, SummaryRow};
pub use features::{
    assemble, polynomial_expand, standardize, DesignMatrix, FeatureSchema, PredictionCase, Scaler,
};
pub use ingest::{
    join_tti_weather, parse_tti_csv, parse_weather_csv, synthesize_dataset, JoinedRecord,
    TtiObservation, WeatherDay,
};
pub use par::Parallelism;
pub use regress::{fit, predict, Family, FittedModel, Kernel, ModelSpec};
pub use select::{rfe, rfe_sweep, RfeResult};

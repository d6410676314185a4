//! Density forecasts of the deseasonalized remainder: ARMA-GARCH with
//! skew-GED innovations, an unconditional KDE, and the goodness-of-fit gate
//! choosing between them.

pub mod arma;
mod density;
mod garch;
mod gof;
mod kde;
pub mod optimize;
mod pipeline;
mod select;
mod sged;

pub use arma::{bic, select_arma_order, ArmaCoefficients, OrderCandidate, OrderSelection};
pub use density::{compose_forecast, DensityForecast, PointForecast, QuantilePoint};
pub use garch::{
    fit_arma_garch, fit_arma_garch_with, forecast_density, ArmaGarchModel, ArmaGarchParams,
    FilterState, FitOptions, FitTrace,
};
pub use gof::{gof_pvalue, pearson_statistic, pit_pvalue, DEFAULT_BINS};
pub use kde::{fit_kde, kde_forecast, silverman_bandwidth, KdeModel};
pub use pipeline::{
    fit_remainder, forecast_candidates, CandidateForecasts, FittedRemainder, ForecastConfig,
};
pub use select::{
    decide, default_threshold_grid, select_model, tune_threshold, ForecastModel, ModelKind,
    ModelSelector, ThresholdTuning,
};
pub use sged::{Sged, SgedParams};

//! Forecast-based portfolio selection of household electricity demand.
//!
//! The pipeline decomposes each (aggregated) demand series into seasonal,
//! trend and remainder parts, forecasts the remainder density with an
//! ARMA-GARCH model or an unconditional kernel density estimate, scores the
//! forecasts with CRPS and MAE, and searches household portfolios whose
//! forecast demand falls in a target band while keeping forecast error low.

// `!(x > 0.0)` style checks deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod decompose;
pub mod error;
pub mod forecast;
pub mod portfolio;
pub mod rng;
pub mod score;
pub mod stats;
pub mod study;

pub use data::{Panel, RawPanel, Window, WindowPlan};
pub use decompose::DecomposedSeries;
pub use error::{Error, Result};
pub use forecast::DensityForecast;
pub use portfolio::{Frontier, FrontierPoint, Partition, SelectionVector};

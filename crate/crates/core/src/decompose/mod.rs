//! Additive seasonal-trend decomposition.

mod loess;
mod stl;

pub use loess::loess;
pub use stl::{multi_stl, multi_stl_with, project_components, stl, DecomposedSeries, StlConfig};

/// Daily and weekly cycles of hourly demand.
pub const DEMAND_PERIODS: [usize; 2] = [24, 168];

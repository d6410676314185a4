//! Smart-meter demand panels: ingestion, imputation, sliding windows,
//! aggregation and a synthetic population generator.

mod aggregate;
mod impute;
mod ingest;
mod synth;
mod window;

pub use aggregate::{aggregate, aggregate_weights, AggregateMode};
pub use impute::impute_missing;
pub use ingest::{ingest, read_readings, write_panel_csv, MeterReading, Resolution};
pub use synth::{synthesize_population, ParamRange, SyntheticPopulationConfig};
pub use window::{make_windows, make_windows_in, Window, WindowPlan};

use chrono::{DateTime, Duration, Utc};
use std::collections::HashSet;
use std::ops::Range;

use crate::error::{invalid, Error, Result};

/// Hours in one week; the seasonal lag used by imputation and naive forecasts.
pub const HOURS_PER_WEEK: usize = 168;

/// Hourly demand panel that may still contain missing slots.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPanel {
    start: DateTime<Utc>,
    household_ids: Vec<String>,
    columns: Vec<Vec<Option<f64>>>,
}

impl RawPanel {
    pub fn new(
        start: DateTime<Utc>,
        household_ids: Vec<String>,
        columns: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        check_shape(&household_ids, columns.iter().map(Vec::len))?;
        for (id, col) in household_ids.iter().zip(&columns) {
            if let Some(v) = col.iter().flatten().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(invalid(format!("household {id} has invalid demand {v}")));
            }
        }
        Ok(Self {
            start,
            household_ids,
            columns,
        })
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_households(&self) -> usize {
        self.household_ids.len()
    }

    pub fn household_ids(&self) -> &[String] {
        &self.household_ids
    }

    pub fn column(&self, i: usize) -> &[Option<f64>] {
        &self.columns[i]
    }

    pub fn missing_count(&self) -> usize {
        self.columns
            .iter()
            .flatten()
            .filter(|v| v.is_none())
            .count()
    }

    pub fn missing_fraction(&self) -> f64 {
        let total = self.len() * self.n_households();
        if total == 0 {
            0.0
        } else {
            self.missing_count() as f64 / total as f64
        }
    }

    /// Converts to a complete [`Panel`]; fails if any slot is missing.
    pub fn into_complete(self) -> Result<Panel> {
        let mut columns = Vec::with_capacity(self.columns.len());
        for (id, col) in self.household_ids.iter().zip(self.columns) {
            let filled: Option<Vec<f64>> = col.into_iter().collect();
            columns
                .push(filled.ok_or_else(|| invalid(format!("household {id} has missing values")))?);
        }
        Panel::new(self.start, self.household_ids, columns)
    }
}

impl From<Panel> for RawPanel {
    fn from(p: Panel) -> Self {
        RawPanel {
            start: p.start,
            household_ids: p.household_ids,
            columns: p
                .columns
                .into_iter()
                .map(|c| c.into_iter().map(Some).collect())
                .collect(),
        }
    }
}

/// Complete T x N panel of hourly demand (kW), one column per household.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    start: DateTime<Utc>,
    household_ids: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Panel {
    pub fn new(
        start: DateTime<Utc>,
        household_ids: Vec<String>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_shape(&household_ids, columns.iter().map(Vec::len))?;
        for (id, col) in household_ids.iter().zip(&columns) {
            if let Some(v) = col.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(invalid(format!("household {id} has invalid demand {v}")));
            }
        }
        Ok(Self {
            start,
            household_ids,
            columns,
        })
    }

    /// Builds a panel with generated ids `h0000`, `h0001`, ... starting at the Unix epoch.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..columns.len()).map(|i| format!("h{i:04}")).collect();
        Self::new(DateTime::<Utc>::UNIX_EPOCH, ids, columns)
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn timestamp(&self, t: usize) -> DateTime<Utc> {
        self.start + Duration::hours(t as i64)
    }

    /// Number of hourly observations T.
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of households N.
    pub fn n_households(&self) -> usize {
        self.household_ids.len()
    }

    pub fn household_ids(&self) -> &[String] {
        &self.household_ids
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Rows `range` of every household.
    pub fn slice_rows(&self, range: Range<usize>) -> Panel {
        Panel {
            start: self.timestamp(range.start),
            household_ids: self.household_ids.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| c[range.clone()].to_vec())
                .collect(),
        }
    }

    /// Panel restricted to the given household indices, in that order.
    pub fn select_columns(&self, indices: &[usize]) -> Panel {
        Panel {
            start: self.start,
            household_ids: indices
                .iter()
                .map(|&i| self.household_ids[i].clone())
                .collect(),
            columns: indices.iter().map(|&i| self.columns[i].clone()).collect(),
        }
    }

    /// Every value multiplied by `factor` (must be non-negative).
    pub fn scaled(&self, factor: f64) -> Panel {
        Panel {
            start: self.start,
            household_ids: self.household_ids.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| c.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }
}

fn check_shape(ids: &[String], lens: impl Iterator<Item = usize>) -> Result<()> {
    let lens: Vec<usize> = lens.collect();
    if lens.len() != ids.len() {
        return Err(invalid(format!(
            "{} household ids for {} columns",
            ids.len(),
            lens.len()
        )));
    }
    if lens.windows(2).any(|w| w[0] != w[1]) {
        return Err(invalid("columns have different lengths"));
    }
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(invalid(format!("household id {id} appears twice")));
        }
    }
    Ok(())
}

pub(crate) fn fmt_ts(ts: DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

impl From<chrono::ParseError> for Error {
    fn from(e: chrono::ParseError) -> Self {
        invalid(format!("bad timestamp: {e}"))
    }
}

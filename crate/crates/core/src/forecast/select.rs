//! Goodness-of-fit gate between ARMA-GARCH and KDE, and its threshold tuning.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arma::select_arma_order;
use super::garch::{fit_arma_garch_with, ArmaGarchModel, FitOptions};
use super::gof::{gof_pvalue, DEFAULT_BINS};
use super::kde::{fit_kde, KdeModel};
use super::pipeline::{forecast_candidates, CandidateForecasts, ForecastConfig};
use crate::data::WindowPlan;
use crate::error::{invalid, Error, Result};
use crate::rng::derive_seed;
use crate::score::crps_ensemble;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ArmaGarch,
    Kde,
}

/// ARMA-GARCH when its goodness-of-fit p-value reaches `delta`, KDE otherwise
/// (including when no p-value is available because the fit failed).
pub fn decide(p_value: Option<f64>, delta: f64) -> ModelKind {
    match p_value {
        Some(p) if p >= delta => ModelKind::ArmaGarch,
        _ => ModelKind::Kde,
    }
}

/// The `0.00, 0.01, ..., 0.20` threshold grid.
pub fn default_threshold_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 100.0).collect()
}

/// Per-lead-time p-value thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSelector {
    pub thresholds: BTreeMap<usize, f64>,
    /// Used for lead times without their own threshold.
    pub default_threshold: f64,
    pub bins: usize,
}

impl Default for ModelSelector {
    fn default() -> Self {
        Self {
            thresholds: BTreeMap::new(),
            default_threshold: 0.05,
            bins: DEFAULT_BINS,
        }
    }
}

impl ModelSelector {
    pub fn uniform(delta: f64) -> Self {
        Self {
            default_threshold: delta,
            ..Self::default()
        }
    }

    pub fn threshold(&self, lead: usize) -> f64 {
        self.thresholds
            .get(&lead)
            .copied()
            .unwrap_or(self.default_threshold)
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .thresholds
            .values()
            .chain(std::iter::once(&self.default_threshold));
        if let Some(d) = all.into_iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(invalid(format!("threshold {d} outside [0, 1]")));
        }
        if self.bins < 2 {
            return Err(invalid("at least two bins are required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum ForecastModel {
    ArmaGarch(Box<ArmaGarchModel>),
    Kde(KdeModel),
}

impl ForecastModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::ArmaGarch(_) => ModelKind::ArmaGarch,
            Self::Kde(_) => ModelKind::Kde,
        }
    }
}

/// Fits ARMA-GARCH (orders up to 3 by BIC) to `series` and keeps it when its
/// goodness-of-fit p-value reaches the lead's threshold; otherwise fits KDE.
pub fn select_model(
    series: &[f64],
    selector: &ModelSelector,
    lead: usize,
) -> Result<ForecastModel> {
    selector.validate()?;
    let garch = (|| {
        let sel = select_arma_order(series, 3, 3)?;
        let opts = FitOptions {
            initial_mean: Some(sel.coefficients),
            ..FitOptions::default()
        };
        let m = fit_arma_garch_with(series, sel.p, sel.q, &opts)?;
        let p = gof_pvalue(&m, series, selector.bins)?;
        Ok::<_, Error>((m, p))
    })();
    let p_value = garch.as_ref().ok().map(|(_, p)| *p);
    match (decide(p_value, selector.threshold(lead)), garch) {
        (ModelKind::ArmaGarch, Ok((m, _))) => Ok(ForecastModel::ArmaGarch(Box::new(m))),
        (_, garch) => fit_kde(series).map(ForecastModel::Kde).map_err(|kde| {
            let g = garch
                .err()
                .map_or("rejected by the gate".to_string(), |e| e.to_string());
            Error::FitFailed(format!("ARMA-GARCH: {g}; KDE: {kde}"))
        }),
    }
}

/// Result of tuning the gate threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTuning {
    pub selector: ModelSelector,
    /// `(lead, delta, mean CRPS)` for every grid point.
    pub table: Vec<(usize, f64, f64)>,
    pub forecasts: usize,
    pub failures: usize,
}

/// Chooses, per lead time, the grid threshold with the smallest mean CRPS
/// over every window of `plan` on every candidate series (ties to the
/// smaller threshold). Each window is forecast once; thresholds only change
/// which candidate forecast is scored.
pub fn tune_threshold(
    series: &[Vec<f64>],
    plan: &WindowPlan,
    leads: &[usize],
    grid: &[f64],
    cfg: &ForecastConfig,
    seed: u64,
) -> Result<ThresholdTuning> {
    if series.is_empty() || plan.is_empty() {
        return Err(invalid(
            "threshold tuning needs at least one series and one window",
        ));
    }
    if grid.is_empty() || leads.is_empty() {
        return Err(invalid("threshold tuning needs a grid and lead times"));
    }
    if let Some(&h) = leads.iter().find(|&&h| h == 0 || h > plan.horizon) {
        return Err(invalid(format!(
            "lead time {h} outside 1..={}",
            plan.horizon
        )));
    }
    let jobs: Vec<(usize, usize)> = (0..series.len())
        .flat_map(|s| (0..plan.len()).map(move |w| (s, w)))
        .collect();
    let results: Vec<(usize, usize, Result<CandidateForecasts>)> = jobs
        .par_iter()
        .map(|&(s, w)| {
            let win = plan.windows[w];
            let y = &series[s];
            if win.test_end > y.len() {
                return (s, w, Err(invalid("window exceeds series")));
            }
            let fc = forecast_candidates(
                &y[win.train()],
                plan.horizon,
                cfg,
                derive_seed(seed, &[s as u64, w as u64]),
            );
            (s, w, fc)
        })
        .collect();

    let mut sums = vec![vec![0.0; grid.len()]; leads.len()];
    let mut counts = vec![0usize; leads.len()];
    let mut failures = 0;
    for (s, w, r) in &results {
        let Ok(c) = r else {
            failures += 1;
            continue;
        };
        let win = plan.windows[*w];
        for (li, &lead) in leads.iter().enumerate() {
            let y = series[*s][win.target(lead)];
            let mut row = Vec::with_capacity(grid.len());
            for &delta in grid {
                match c.choose(lead, delta) {
                    Some((_, f)) => row.push(crps_ensemble(&f.ensemble, y)?),
                    None => break,
                }
            }
            if row.len() == grid.len() {
                for (acc, v) in sums[li].iter_mut().zip(row) {
                    *acc += v;
                }
                counts[li] += 1;
            }
        }
    }
    let mut selector = ModelSelector::default();
    let mut table = Vec::new();
    for (li, &lead) in leads.iter().enumerate() {
        if counts[li] == 0 {
            return Err(Error::FitFailed(format!(
                "no validation forecast succeeded at lead {lead}"
            )));
        }
        let mut best = (f64::INFINITY, grid[0]);
        for (gi, &delta) in grid.iter().enumerate() {
            let m = sums[li][gi] / counts[li] as f64;
            table.push((lead, delta, m));
            if m < best.0 || (m == best.0 && delta < best.1) {
                best = (m, delta);
            }
        }
        selector.thresholds.insert(lead, best.1);
    }
    if let Some(&d) = grid.first() {
        selector.default_threshold = d;
    }
    Ok(ThresholdTuning {
        selector,
        table,
        forecasts: results.len() - failures,
        failures,
    })
}

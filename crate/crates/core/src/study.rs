//! Forecast accuracy against the size of randomly drawn household groups.

use std::io::{Read, Write};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::{aggregate_weights, make_windows, AggregateMode, Panel, HOURS_PER_WEEK};
use crate::decompose::{multi_stl, project_components, DEMAND_PERIODS};
use crate::error::{invalid, Error, Result};
use crate::forecast::{compose_forecast, fit_kde, kde_forecast, DensityForecast, PointForecast};
use crate::portfolio::SelectionVector;
use crate::rng::{derive_rng, derive_seed};
use crate::score::evaluate_windows;
use crate::stats::{mean, std_dev};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregationStudyConfig {
    pub group_sizes: Vec<usize>,
    pub groups_per_size: usize,
    pub lead_times: Vec<usize>,
    pub train_hours: usize,
    /// Prime spacing of forecast origins.
    pub window_stride: usize,
    pub max_windows: Option<usize>,
    pub ensemble_size: usize,
    /// Most recent remainder values the KDE uses; all when absent.
    pub kde_window: Option<usize>,
    pub periods: Vec<usize>,
    pub seed: u64,
}

impl Default for AggregationStudyConfig {
    fn default() -> Self {
        Self {
            group_sizes: vec![1, 10, 25, 50, 100, 200],
            groups_per_size: 20,
            lead_times: vec![4, 12, 24],
            train_hours: 12 * HOURS_PER_WEEK,
            window_stride: 97,
            max_windows: None,
            ensemble_size: 1000,
            kde_window: None,
            periods: DEMAND_PERIODS.to_vec(),
            seed: 42,
        }
    }
}

impl AggregationStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_sizes.is_empty() || self.group_sizes.contains(&0) {
            return Err(invalid("group sizes must be positive"));
        }
        if self.groups_per_size == 0 || self.ensemble_size == 0 {
            return Err(invalid(
                "groups per size and ensemble size must be positive",
            ));
        }
        if self.lead_times.is_empty() || self.lead_times.contains(&0) {
            return Err(invalid("lead times must be positive"));
        }
        if self.kde_window.is_some_and(|w| w < 2) {
            return Err(invalid("KDE window must hold at least two values"));
        }
        Ok(())
    }
}

/// Mean scores of one group size at one lead time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationRow {
    pub group_size: usize,
    pub lead_time_h: usize,
    pub crps_kw: f64,
    pub mae_kw: f64,
    /// Spread of the per-group mean CRPS.
    pub crps_sd: f64,
    pub groups: usize,
    pub windows: usize,
}

pub const AGGREGATION_CSV_HEADER: [&str; 7] = [
    "group_size",
    "lead_time_h",
    "crps_kw",
    "mae_kw",
    "crps_sd",
    "groups",
    "windows",
];

/// STL then KDE on the remainder, re-composed with the projected seasonal
/// and trend components.
pub fn kde_pipeline_forecast(
    train: &[f64],
    horizon: usize,
    periods: &[usize],
    ensemble_size: usize,
    kde_window: Option<usize>,
    seed: u64,
) -> Result<Vec<DensityForecast>> {
    let d = multi_stl(train, periods)?;
    let r = &d.remainder;
    let tail = &r[r.len() - kde_window.unwrap_or(r.len()).min(r.len())..];
    let model = fit_kde(tail)?;
    let fc = kde_forecast(&model, horizon, ensemble_size, seed)?;
    let (seasonal, trend) = project_components(&d, horizon);
    compose_forecast(&fc, &seasonal, &trend)
}

/// For each group size, draws random groups without replacement, forecasts
/// the group's average demand with the KDE pipeline over sliding windows,
/// and averages CRPS and MAE over windows and groups.
pub fn aggregation_study(
    panel: &Panel,
    cfg: &AggregationStudyConfig,
) -> Result<Vec<AggregationRow>> {
    cfg.validate()?;
    let n = panel.n_households();
    if let Some(&s) = cfg.group_sizes.iter().find(|&&s| s > n) {
        return Err(invalid(format!(
            "group size {s} exceeds the {n} households"
        )));
    }
    let max_lead = *cfg.lead_times.iter().max().expect("validated");
    let mut plan = make_windows(panel.len(), cfg.train_hours, max_lead, cfg.window_stride)?;
    if let Some(m) = cfg.max_windows {
        plan.windows.truncate(m.max(1));
    }
    let mut rows = Vec::new();
    for &size in &cfg.group_sizes {
        // every draw of the full population is the same group
        let groups = if size == n { 1 } else { cfg.groups_per_size };
        let mut per_group: Vec<Vec<(f64, f64, usize)>> = vec![Vec::new(); cfg.lead_times.len()];
        for g in 0..groups {
            let mut rng = derive_rng(cfg.seed, &[size as u64, g as u64]);
            let members = sample(&mut rng, n, size).into_vec();
            let series = aggregate_weights(
                panel,
                SelectionVector::from_indices(n, &members).weights(),
                AggregateMode::Average,
            )?;
            let seed = derive_seed(cfg.seed, &[size as u64, g as u64, 1]);
            let forecaster = |train: &[f64], horizon: usize, w: usize| {
                kde_pipeline_forecast(
                    train,
                    horizon,
                    &cfg.periods,
                    cfg.ensemble_size,
                    cfg.kde_window,
                    derive_seed(seed, &[w as u64]),
                )
            };
            let e = evaluate_windows(
                &series,
                &plan,
                &cfg.lead_times,
                &forecaster,
                PointForecast::Mean,
            )?;
            for (li, &lead) in cfg.lead_times.iter().enumerate() {
                if let Some(s) = e.summary(lead) {
                    per_group[li].push(s);
                }
            }
        }
        for (li, &lead) in cfg.lead_times.iter().enumerate() {
            let s = &per_group[li];
            if s.is_empty() {
                return Err(Error::FitFailed(format!(
                    "no forecast succeeded for group size {size}"
                )));
            }
            let crps: Vec<f64> = s.iter().map(|x| x.0).collect();
            let mae: Vec<f64> = s.iter().map(|x| x.1).collect();
            rows.push(AggregationRow {
                group_size: size,
                lead_time_h: lead,
                crps_kw: mean(&crps),
                mae_kw: mean(&mae),
                crps_sd: if crps.len() > 1 { std_dev(&crps) } else { 0.0 },
                groups: s.len(),
                windows: s.iter().map(|x| x.2).sum(),
            });
        }
        log::info!("group size {size} done");
    }
    Ok(rows)
}

pub fn write_aggregation_csv<W: Write>(rows: &[AggregationRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record(AGGREGATION_CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads and checks an aggregation-study CSV.
pub fn read_aggregation_csv<R: Read>(reader: R) -> Result<Vec<AggregationRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != AGGREGATION_CSV_HEADER {
        return Err(invalid(format!(
            "unexpected aggregation-study header {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for (i, row) in r.deserialize::<AggregationRow>().enumerate() {
        let row = row?;
        let ok = [row.crps_kw, row.mae_kw, row.crps_sd]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if !ok || row.group_size == 0 || row.lead_time_h == 0 || row.groups == 0 {
            return Err(invalid(format!(
                "line {}: invalid aggregation-study row",
                i + 2
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(n: usize, hours: usize) -> Panel {
        let cols = (0..n)
            .map(|i| {
                let mut rng = derive_rng(7, &[i as u64]);
                (0..hours)
                    .map(|t| {
                        let z: f64 =
                            rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                        (1.0 + 0.4 * (t as f64 * std::f64::consts::TAU / 24.0).sin() + 0.3 * z)
                            .max(0.0)
                    })
                    .collect()
            })
            .collect();
        Panel::from_columns(cols).unwrap()
    }

    fn small_config() -> AggregationStudyConfig {
        AggregationStudyConfig {
            group_sizes: vec![1, 20],
            groups_per_size: 3,
            lead_times: vec![4],
            train_hours: 2 * HOURS_PER_WEEK,
            window_stride: 47,
            max_windows: Some(4),
            ensemble_size: 300,
            ..Default::default()
        }
    }

    #[test]
    fn larger_groups_forecast_better() {
        let p = panel(20, 3 * HOURS_PER_WEEK);
        let rows = aggregation_study(&p, &small_config()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].groups, 1);
        // independent noise averages out roughly as 1 / sqrt(size)
        assert!(rows[1].crps_kw < 0.5 * rows[0].crps_kw, "{rows:?}");
        assert_eq!(rows, aggregation_study(&p, &small_config()).unwrap());
    }

    #[test]
    fn rejects_oversized_groups_and_round_trips() {
        let p = panel(5, 3 * HOURS_PER_WEEK);
        let cfg = AggregationStudyConfig {
            group_sizes: vec![6],
            ..small_config()
        };
        assert!(aggregation_study(&p, &cfg).is_err());
        let cfg = AggregationStudyConfig {
            group_sizes: vec![2],
            ..small_config()
        };
        let rows = aggregation_study(&p, &cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let mut buf = Vec::new();
        write_aggregation_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("group_size,lead_time_h,"));
        assert_eq!(read_aggregation_csv(buf.as_slice()).unwrap(), rows);
    }
}

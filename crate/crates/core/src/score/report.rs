use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::crps::crps_ensemble;
use crate::data::WindowPlan;
use crate::error::{invalid, Result};
use crate::forecast::{DensityForecast, PointForecast};
use crate::stats::{mean, std_dev};

/// Produces density forecasts for leads `1..=horizon` from a training series.
pub trait Forecaster: Sync {
    fn forecast(
        &self,
        train: &[f64],
        horizon: usize,
        window: usize,
    ) -> Result<Vec<DensityForecast>>;
}

impl<F> Forecaster for F
where
    F: Fn(&[f64], usize, usize) -> Result<Vec<DensityForecast>> + Sync,
{
    fn forecast(
        &self,
        train: &[f64],
        horizon: usize,
        window: usize,
    ) -> Result<Vec<DensityForecast>> {
        self(train, horizon, window)
    }
}

/// Scores of one window at one lead time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadScore {
    pub lead_time: usize,
    pub crps: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFailure {
    pub window: usize,
    pub message: String,
}

/// Per-window scores of one series under one forecaster.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WindowEvaluation {
    /// `(window index, scores at each requested lead)` for successful windows.
    pub scores: Vec<(usize, Vec<LeadScore>)>,
    pub failures: Vec<WindowFailure>,
}

impl WindowEvaluation {
    /// Mean CRPS and MAE over successful windows at `lead`.
    pub fn summary(&self, lead: usize) -> Option<(f64, f64, usize)> {
        let rows: Vec<&LeadScore> = self
            .scores
            .iter()
            .filter_map(|(_, s)| s.iter().find(|l| l.lead_time == lead))
            .collect();
        if rows.is_empty() {
            return None;
        }
        let crps: Vec<f64> = rows.iter().map(|r| r.crps).collect();
        let abs: Vec<f64> = rows.iter().map(|r| r.abs_error).collect();
        Some((mean(&crps), mean(&abs), rows.len()))
    }

    /// One report cell per lead with at least one successful window.
    pub fn cells(
        &self,
        approach: &str,
        partition: Option<usize>,
        leads: &[usize],
    ) -> Vec<ReportCell> {
        leads
            .iter()
            .filter_map(|&lead| {
                let rows: Vec<&LeadScore> = self
                    .scores
                    .iter()
                    .filter_map(|(_, s)| s.iter().find(|l| l.lead_time == lead))
                    .collect();
                if rows.is_empty() {
                    return None;
                }
                let crps: Vec<f64> = rows.iter().map(|r| r.crps).collect();
                let abs: Vec<f64> = rows.iter().map(|r| r.abs_error).collect();
                Some(ReportCell {
                    approach: approach.to_string(),
                    lead_time_h: lead,
                    partition_k: partition,
                    crps_kw: mean(&crps),
                    mae_kw: mean(&abs),
                    windows: rows.len(),
                    crps_sd: if rows.len() > 1 { std_dev(&crps) } else { 0.0 },
                    failures: self.failures.len(),
                })
            })
            .collect()
    }
}

/// Rolling-origin evaluation of `forecaster` on `series` over every window
/// of `plan`, scored at each of `leads`. Window failures are recorded and
/// do not abort the evaluation; windows run concurrently and are merged in
/// window order.
pub fn evaluate_windows<F: Forecaster + ?Sized>(
    series: &[f64],
    plan: &WindowPlan,
    leads: &[usize],
    forecaster: &F,
    point: PointForecast,
) -> Result<WindowEvaluation> {
    if leads.is_empty() {
        return Err(invalid("no lead times requested"));
    }
    if let Some(&bad) = leads.iter().find(|&&h| h == 0 || h > plan.horizon) {
        return Err(invalid(format!(
            "lead time {bad} outside 1..={}",
            plan.horizon
        )));
    }
    if let Some(w) = plan.windows.iter().find(|w| w.test_end > series.len()) {
        return Err(invalid(format!(
            "window ending at {} exceeds the {}-point series",
            w.test_end,
            series.len()
        )));
    }
    let results: Vec<(usize, Result<Vec<LeadScore>>)> = plan
        .windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let run = || -> Result<Vec<LeadScore>> {
                let fc = forecaster.forecast(&series[w.train()], plan.horizon, i)?;
                leads
                    .iter()
                    .map(|&lead| {
                        let f = fc.iter().find(|f| f.lead_time == lead).ok_or_else(|| {
                            invalid(format!("forecaster returned no lead {lead}"))
                        })?;
                        let y = series[w.target(lead)];
                        Ok(LeadScore {
                            lead_time: lead,
                            crps: crps_ensemble(&f.ensemble, y)?,
                            abs_error: (f.point(point) - y).abs(),
                        })
                    })
                    .collect()
            };
            (i, run())
        })
        .collect();
    let mut out = WindowEvaluation::default();
    for (i, r) in results {
        match r {
            Ok(s) => out.scores.push((i, s)),
            Err(e) => {
                log::warn!("window {i}: {e}");
                out.failures.push(WindowFailure {
                    window: i,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Mean scores for one (approach, lead time, partition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub approach: String,
    pub lead_time_h: usize,
    pub partition_k: Option<usize>,
    pub crps_kw: f64,
    pub mae_kw: f64,
    pub windows: usize,
    /// Standard deviation of the per-window CRPS.
    pub crps_sd: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub cells: Vec<ReportCell>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    approach: String,
    lead_time_h: usize,
    partition_k: Option<usize>,
    crps_kw: f64,
    mae_kw: f64,
    windows: usize,
}

impl EvaluationReport {
    pub fn push(&mut self, cells: impl IntoIterator<Item = ReportCell>) {
        self.cells.extend(cells);
    }

    /// `approach,lead_time_h,partition_k,crps_kw,mae_kw,windows`; an empty
    /// partition means the cell is not tied to a demand partition.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for c in &self.cells {
            w.serialize(CsvRow {
                approach: c.approach.clone(),
                lead_time_h: c.lead_time_h,
                partition_k: c.partition_k,
                crps_kw: c.crps_kw,
                mae_kw: c.mae_kw,
                windows: c.windows,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV form back; dispersion and failure counts are not part of it.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let expected = [
            "approach",
            "lead_time_h",
            "partition_k",
            "crps_kw",
            "mae_kw",
            "windows",
        ];
        if headers.iter().ne(expected) {
            return Err(invalid(format!("unexpected report header {headers:?}")));
        }
        let mut cells = Vec::new();
        for row in r.deserialize() {
            let row: CsvRow = row?;
            if row.windows == 0 || !(row.crps_kw >= 0.0) || !(row.mae_kw >= 0.0) {
                return Err(invalid(format!("invalid report row {row:?}")));
            }
            cells.push(ReportCell {
                approach: row.approach,
                lead_time_h: row.lead_time_h,
                partition_k: row.partition_k,
                crps_kw: row.crps_kw,
                mae_kw: row.mae_kw,
                windows: row.windows,
                crps_sd: 0.0,
                failures: 0,
            });
        }
        Ok(Self { cells })
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// Mean CRPS over the cells of one approach at one lead time.
    pub fn mean_crps(&self, approach: &str, lead: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.approach == approach && c.lead_time_h == lead)
            .map(|c| c.crps_kw)
            .collect();
        (!v.is_empty()).then(|| mean(&v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_windows;

    fn perfect(
        series: Vec<f64>,
    ) -> impl Fn(&[f64], usize, usize) -> Result<Vec<DensityForecast>> + Sync {
        move |train: &[f64], horizon: usize, _| {
            // the training range is a prefix of `series` shifted by the window start
            let start = series
                .windows(train.len())
                .position(|w| w == train)
                .ok_or_else(|| invalid("unknown window"))?;
            (1..=horizon)
                .map(|h| DensityForecast::new(h, vec![series[start + train.len() + h - 1]]))
                .collect()
        }
    }

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|t| t as f64 * 0.1 + (t % 7) as f64).collect()
    }

    #[test]
    fn perfect_foresight_scores_zero() {
        let y = ramp(300);
        let plan = make_windows(300, 100, 24, 23).unwrap();
        let ev = evaluate_windows(
            &y,
            &plan,
            &[1, 12, 24],
            &perfect(y.clone()),
            PointForecast::Mean,
        )
        .unwrap();
        assert_eq!(ev.scores.len(), plan.len());
        for c in ev.cells("oracle", None, &[1, 12, 24]) {
            assert_eq!((c.crps_kw, c.mae_kw, c.windows), (0.0, 0.0, plan.len()));
        }
    }

    #[test]
    fn single_window_report_equals_its_scores() {
        let y = ramp(130);
        let plan = make_windows(130, 100, 24, 23).unwrap();
        assert_eq!(plan.len(), 1);
        let f = |_: &[f64], h: usize, _| {
            (1..=h)
                .map(|l| DensityForecast::new(l, vec![0.0, 2.0]))
                .collect()
        };
        let ev = evaluate_windows(&y, &plan, &[3], &f, PointForecast::Mean).unwrap();
        let target = y[102];
        let c = &ev.cells("stub", Some(0), &[3])[0];
        assert_eq!(c.crps_kw, crps_ensemble(&[0.0, 2.0], target).unwrap());
        assert_eq!(c.mae_kw, (1.0 - target).abs());
    }

    #[test]
    fn failures_are_counted_not_fatal() {
        let y = ramp(400);
        let plan = make_windows(400, 100, 24, 23).unwrap();
        let f = |_: &[f64], h: usize, w: usize| {
            if w % 3 == 0 {
                Err(invalid("boom"))
            } else {
                (1..=h)
                    .map(|l| DensityForecast::new(l, vec![1.0]))
                    .collect()
            }
        };
        let ev = evaluate_windows(&y, &plan, &[1], &f, PointForecast::Mean).unwrap();
        let failed = (0..plan.len()).filter(|w| w % 3 == 0).count();
        assert_eq!(ev.failures.len(), failed);
        assert_eq!(ev.cells("x", None, &[1])[0].windows, plan.len() - failed);
    }

    #[test]
    fn csv_round_trip() {
        let mut r = EvaluationReport::default();
        r.push([
            ReportCell {
                approach: "fv".into(),
                lead_time_h: 4,
                partition_k: Some(2),
                crps_kw: 0.25,
                mae_kw: 0.5,
                windows: 10,
                crps_sd: 0.0,
                failures: 0,
            },
            ReportCell {
                approach: "kde".into(),
                lead_time_h: 12,
                partition_k: None,
                crps_kw: 1.0,
                mae_kw: 2.0,
                windows: 3,
                crps_sd: 0.0,
                failures: 0,
            },
        ]);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("approach,lead_time_h,partition_k,crps_kw,mae_kw,windows\n"));
        assert_eq!(EvaluationReport::read_csv(buf.as_slice()).unwrap(), r);
        assert_eq!(r.mean_crps("fv", 4), Some(0.25));
    }
}

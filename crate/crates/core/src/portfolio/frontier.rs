//! Efficient-frontier assembly: per lead time and demand partition, optimize
//! each approach, evaluate the chosen portfolio out of sample, and compare
//! against random feasible portfolios.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ga::{
    ga_optimize_relaxed, ga_optimize_seeded, random_feasible_selection, GaConfig, GaResult,
};
use super::objective::{
    FvConfig, FvObjective, Memoized, Objective, RsdDenominator, SrObjective, SsObjective,
    SsWeighting,
};
use super::partition::{
    household_point_forecasts, partition_demand_range, partition_reachable, Partition,
    PointFallback,
};
use super::selection::{SelectionMode, SelectionVector};
use super::tuning::{default_ss_grid, tune_ss_weight, LeadProblem, SsConfig};
use crate::data::{
    aggregate_weights, make_windows_in, AggregateMode, Panel, WindowPlan, HOURS_PER_WEEK,
};
use crate::error::{invalid, Error, Result};
use crate::forecast::{
    default_threshold_grid, forecast_candidates, tune_threshold, DensityForecast, ForecastConfig,
    ModelSelector, PointForecast,
};
use crate::rng::{derive_rng, derive_seed};
use crate::score::{EvaluationReport, WindowEvaluation};
use crate::stats::mean;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Random,
    Fv,
    Sr,
    Ss,
    FvRelaxed,
    SrRelaxed,
    SsRelaxed,
}

impl Approach {
    pub const ALL: [Approach; 7] = [
        Approach::Random,
        Approach::Fv,
        Approach::Sr,
        Approach::Ss,
        Approach::FvRelaxed,
        Approach::SrRelaxed,
        Approach::SsRelaxed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Approach::Random => "random",
            Approach::Fv => "fv",
            Approach::Sr => "sr",
            Approach::Ss => "ss",
            Approach::FvRelaxed => "fv_relaxed",
            Approach::SrRelaxed => "sr_relaxed",
            Approach::SsRelaxed => "ss_relaxed",
        }
    }

    pub fn is_relaxed(self) -> bool {
        matches!(
            self,
            Approach::FvRelaxed | Approach::SrRelaxed | Approach::SsRelaxed
        )
    }

    /// The binary approach a relaxed one starts from.
    pub fn binary(self) -> Approach {
        match self {
            Approach::FvRelaxed => Approach::Fv,
            Approach::SrRelaxed => Approach::Sr,
            Approach::SsRelaxed => Approach::Ss,
            a => a,
        }
    }

    fn code(self) -> u64 {
        Approach::ALL.iter().position(|&a| a == self).unwrap_or(0) as u64
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Approach::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| invalid(format!("unknown approach {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontierConfig {
    /// Number of equal-width demand partitions `K`.
    pub partitions: usize,
    pub lead_times: Vec<usize>,
    pub approaches: Vec<Approach>,
    /// Trailing hours held out for out-of-sample evaluation.
    pub out_of_sample_hours: usize,
    /// Hours before the out-of-sample part used by the objectives; also the
    /// training length of every forecast.
    pub objective_hours: usize,
    /// Prime spacing of out-of-sample forecast origins.
    pub window_stride: usize,
    pub max_windows: Option<usize>,
    pub delta_grid: Vec<f64>,
    /// Random household groups used to tune the gate threshold.
    pub delta_tuning_series: usize,
    /// Prime spacing of the in-sample tuning windows.
    pub delta_tuning_stride: usize,
    pub r_grid: Vec<f64>,
    pub ss_weighting: SsWeighting,
    pub rsd_denominator: RsdDenominator,
    /// Random feasible portfolios per (lead time, partition).
    pub random_samples: usize,
    pub ga: GaConfig,
    /// GA settings for FV; `ga` when absent.
    pub fv_ga: Option<GaConfig>,
    pub fv: FvConfig,
    pub forecast: ForecastConfig,
    pub point: PointForecast,
    pub seed: u64,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        Self {
            partitions: 10,
            lead_times: vec![4, 12, 24],
            approaches: vec![Approach::Random, Approach::Fv, Approach::Sr, Approach::Ss],
            out_of_sample_hours: 6 * HOURS_PER_WEEK,
            objective_hours: 12 * HOURS_PER_WEEK,
            window_stride: 109,
            max_windows: None,
            delta_grid: default_threshold_grid(),
            delta_tuning_series: 4,
            delta_tuning_stride: 331,
            r_grid: default_ss_grid(),
            ss_weighting: SsWeighting::PerLead,
            rsd_denominator: RsdDenominator::DemandMean,
            random_samples: 100,
            ga: GaConfig::default(),
            fv_ga: None,
            fv: FvConfig::default(),
            forecast: ForecastConfig::default(),
            point: PointForecast::Mean,
            seed: 42,
        }
    }
}

impl FrontierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.partitions == 0 {
            return Err(invalid("at least one partition is required"));
        }
        if self.lead_times.is_empty()
            || self
                .lead_times
                .iter()
                .any(|&h| h == 0 || h > HOURS_PER_WEEK)
        {
            return Err(invalid(format!(
                "lead times must be a non-empty subset of 1..={HOURS_PER_WEEK}"
            )));
        }
        if self.approaches.is_empty() {
            return Err(invalid("no approaches requested"));
        }
        if self.objective_hours < 2 * HOURS_PER_WEEK {
            return Err(invalid("objective span must cover at least two weeks"));
        }
        if self.out_of_sample_hours < self.max_lead() {
            return Err(invalid(
                "out-of-sample part is shorter than the longest lead time",
            ));
        }
        if self.delta_grid.is_empty() || self.delta_grid.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(invalid(
                "threshold grid must be non-empty and inside [0, 1]",
            ));
        }
        if self.r_grid.is_empty() || self.r_grid.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(invalid(
                "SS weight grid must be non-empty and inside [0, 1]",
            ));
        }
        for p in [self.window_stride, self.delta_tuning_stride] {
            if !crate::stats::is_prime(p) {
                return Err(Error::NotPrime(p));
            }
        }
        self.ga.validate()?;
        if let Some(g) = &self.fv_ga {
            g.validate()?;
        }
        self.fv.validate()?;
        self.forecast.validate()
    }

    pub fn max_lead(&self) -> usize {
        self.lead_times.iter().copied().max().unwrap_or(1)
    }

    /// Hours the panel must cover: threshold tuning needs at least one
    /// in-sample window beyond the objective span.
    pub fn required_hours(&self) -> usize {
        self.objective_hours + self.max_lead() + self.out_of_sample_hours
    }

    fn wants(&self, a: Approach) -> bool {
        self.approaches.contains(&a)
    }
}

/// One evaluated portfolio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub approach: Approach,
    pub lead_time: usize,
    pub partition: usize,
    pub lower: f64,
    pub upper: f64,
    /// `Y_hat(h) . v` in kW.
    pub expected_demand: f64,
    pub crps: f64,
    pub mae: f64,
    pub windows: usize,
    /// In-sample objective value of the selection (absent for random).
    pub objective: Option<f64>,
    pub selection: SelectionVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub approach: Approach,
    pub lead_time: usize,
    pub partition: usize,
    pub message: String,
}

/// Mean out-of-sample scores of one approach at one lead time, with the
/// improvement over random portfolios on the partitions both cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachSummary {
    pub approach: Approach,
    pub lead_time: usize,
    pub partitions: usize,
    pub mean_crps: f64,
    pub mean_mae: f64,
    pub crps_improvement_vs_random: Option<f64>,
    pub mae_improvement_vs_random: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub household_ids: Vec<String>,
    pub partitions: Vec<Partition>,
    pub points: Vec<FrontierPoint>,
    /// Cells that could not be produced.
    pub failures: Vec<CellFailure>,
    /// Partitions no selection under the cardinality cap can reach.
    pub skipped: Vec<CellFailure>,
    pub thresholds: ModelSelector,
    /// `(lead, delta, mean CRPS)` from threshold tuning.
    pub threshold_table: Vec<(usize, f64, f64)>,
    pub ss: SsConfig,
    /// `(lead, r, mean validation CRPS)` from SS weight tuning.
    pub ss_table: Vec<(usize, f64, f64)>,
    pub point_fallbacks: Vec<PointFallback>,
    pub windows: usize,
}

impl Frontier {
    pub fn points_for(
        &self,
        approach: Approach,
        lead: usize,
    ) -> impl Iterator<Item = &FrontierPoint> {
        self.points
            .iter()
            .filter(move |p| p.approach == approach && p.lead_time == lead)
    }

    /// Per-partition mean `(crps, mae)` of an approach at a lead time.
    pub fn partition_means(&self, approach: Approach, lead: usize) -> BTreeMap<usize, (f64, f64)> {
        let mut groups: BTreeMap<usize, Vec<&FrontierPoint>> = BTreeMap::new();
        for p in self.points_for(approach, lead) {
            groups.entry(p.partition).or_default().push(p);
        }
        groups
            .into_iter()
            .map(|(k, ps)| {
                let crps: Vec<f64> = ps.iter().map(|p| p.crps).collect();
                let mae: Vec<f64> = ps.iter().map(|p| p.mae).collect();
                (k, (mean(&crps), mean(&mae)))
            })
            .collect()
    }

    /// Mean CRPS of `a` and of `b` over the partitions both have at `lead`.
    pub fn matched_mean_crps(&self, a: Approach, b: Approach, lead: usize) -> Option<(f64, f64)> {
        let (ma, mb) = (self.partition_means(a, lead), self.partition_means(b, lead));
        let common: Vec<usize> = ma.keys().filter(|k| mb.contains_key(k)).copied().collect();
        if common.is_empty() {
            return None;
        }
        let avg = |m: &BTreeMap<usize, (f64, f64)>| {
            common.iter().map(|k| m[k].0).sum::<f64>() / common.len() as f64
        };
        Some((avg(&ma), avg(&mb)))
    }

    pub fn summary(&self, leads: &[usize]) -> Vec<ApproachSummary> {
        let mut out = Vec::new();
        let mut approaches: Vec<Approach> = self.points.iter().map(|p| p.approach).collect();
        approaches.sort();
        approaches.dedup();
        for &a in &approaches {
            for &lead in leads {
                let m = self.partition_means(a, lead);
                if m.is_empty() {
                    continue;
                }
                let random = self.partition_means(Approach::Random, lead);
                let common: Vec<usize> = m
                    .keys()
                    .filter(|k| random.contains_key(k))
                    .copied()
                    .collect();
                let improvement = |idx: fn(&(f64, f64)) -> f64| {
                    if a == Approach::Random || common.is_empty() {
                        return None;
                    }
                    let mine: f64 = common.iter().map(|k| idx(&m[k])).sum();
                    let theirs: f64 = common.iter().map(|k| idx(&random[k])).sum();
                    (theirs > 0.0).then(|| 1.0 - mine / theirs)
                };
                let vals: Vec<&(f64, f64)> = m.values().collect();
                out.push(ApproachSummary {
                    approach: a,
                    lead_time: lead,
                    partitions: m.len(),
                    mean_crps: vals.iter().map(|v| v.0).sum::<f64>() / vals.len() as f64,
                    mean_mae: vals.iter().map(|v| v.1).sum::<f64>() / vals.len() as f64,
                    crps_improvement_vs_random: improvement(|v| v.0),
                    mae_improvement_vs_random: improvement(|v| v.1),
                });
            }
        }
        out
    }

    /// Scores as an evaluation report, one cell per (approach, lead,
    /// partition); random portfolios are averaged per partition.
    pub fn report(&self, leads: &[usize]) -> EvaluationReport {
        let mut report = EvaluationReport::default();
        let mut approaches: Vec<Approach> = self.points.iter().map(|p| p.approach).collect();
        approaches.sort();
        approaches.dedup();
        for &a in &approaches {
            for &lead in leads {
                let mut groups: BTreeMap<usize, Vec<&FrontierPoint>> = BTreeMap::new();
                for p in self.points_for(a, lead) {
                    groups.entry(p.partition).or_default().push(p);
                }
                report.push(groups.into_iter().map(|(k, ps)| {
                    let crps: Vec<f64> = ps.iter().map(|p| p.crps).collect();
                    crate::score::ReportCell {
                        approach: a.name().to_string(),
                        lead_time_h: lead,
                        partition_k: Some(k),
                        crps_kw: mean(&crps),
                        mae_kw: mean(&ps.iter().map(|p| p.mae).collect::<Vec<_>>()),
                        windows: ps.iter().map(|p| p.windows).min().unwrap_or(0),
                        crps_sd: if crps.len() > 1 {
                            crate::stats::std_dev(&crps)
                        } else {
                            0.0
                        },
                        failures: 0,
                    }
                }));
            }
        }
        report
    }

    /// `approach,lead_time_h,partition_k,expected_demand_kw,crps_kw,mae_kw,selection_bitmap`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(FRONTIER_CSV_HEADER)?;
        for p in &self.points {
            w.write_record([
                p.approach.name().to_string(),
                p.lead_time.to_string(),
                p.partition.to_string(),
                p.expected_demand.to_string(),
                p.crps.to_string(),
                p.mae.to_string(),
                p.selection.bitmap(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Points with selections as household-id lists (binary) or id-to-weight
    /// maps (relaxed).
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        #[derive(Serialize)]
        #[serde(untagged)]
        enum Members<'a> {
            Ids(Vec<&'a str>),
            Weights(BTreeMap<&'a str, f64>),
        }
        #[derive(Serialize)]
        struct Point<'a> {
            approach: Approach,
            lead_time_h: usize,
            partition_k: usize,
            lower_kw: f64,
            upper_kw: f64,
            expected_demand_kw: f64,
            crps_kw: f64,
            mae_kw: f64,
            windows: usize,
            objective: Option<f64>,
            selection: Members<'a>,
        }
        let ids = &self.household_ids;
        let points: Vec<Point> = self
            .points
            .iter()
            .map(|p| {
                let members = match p.selection.mode() {
                    SelectionMode::Binary => {
                        Members::Ids(p.selection.selected().map(|i| ids[i].as_str()).collect())
                    }
                    SelectionMode::Relaxed => Members::Weights(
                        p.selection
                            .selected()
                            .map(|i| (ids[i].as_str(), p.selection.weights()[i]))
                            .collect(),
                    ),
                };
                Point {
                    approach: p.approach,
                    lead_time_h: p.lead_time,
                    partition_k: p.partition,
                    lower_kw: p.lower,
                    upper_kw: p.upper,
                    expected_demand_kw: p.expected_demand,
                    crps_kw: p.crps,
                    mae_kw: p.mae,
                    windows: p.windows,
                    objective: p.objective,
                    selection: members,
                }
            })
            .collect();
        serde_json::to_writer_pretty(writer, &points)?;
        Ok(())
    }
}

pub const FRONTIER_CSV_HEADER: [&str; 7] = [
    "approach",
    "lead_time_h",
    "partition_k",
    "expected_demand_kw",
    "crps_kw",
    "mae_kw",
    "selection_bitmap",
];

/// One parsed line of a frontier CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub approach: Approach,
    pub lead_time_h: usize,
    pub partition_k: usize,
    pub expected_demand_kw: f64,
    pub crps_kw: f64,
    pub mae_kw: f64,
    pub selection_bitmap: String,
}

/// Reads and checks a frontier CSV: exact header, finite non-negative
/// scores, and `0`/`1` bitmaps of one length with at least one `1`.
pub fn read_frontier_csv<R: Read>(reader: R) -> Result<Vec<FrontierRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != FRONTIER_CSV_HEADER {
        return Err(invalid(format!("unexpected frontier header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, row) in r.deserialize::<FrontierRow>().enumerate() {
        let row = row?;
        let line = i + 2;
        let scores = [row.expected_demand_kw, row.crps_kw, row.mae_kw];
        if scores.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid(format!(
                "line {line}: scores must be finite and non-negative"
            )));
        }
        if row.lead_time_h == 0 {
            return Err(invalid(format!("line {line}: lead time must be positive")));
        }
        let bits = &row.selection_bitmap;
        if bits.is_empty() || bits.chars().any(|c| c != '0' && c != '1') || !bits.contains('1') {
            return Err(invalid(format!("line {line}: malformed selection bitmap")));
        }
        if rows
            .first()
            .is_some_and(|f: &FrontierRow| f.selection_bitmap.len() != bits.len())
        {
            return Err(invalid(format!(
                "line {line}: bitmap length differs from the first row"
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Out-of-sample window plan: forecasts trained on `objective_hours` hours,
/// with every target after the in-sample part.
pub fn out_of_sample_plan(n: usize, cfg: &FrontierConfig) -> Result<WindowPlan> {
    if n < cfg.required_hours() {
        return Err(Error::TooShort {
            required: cfg.required_hours(),
            actual: n,
        });
    }
    let in_sample_end = n - cfg.out_of_sample_hours;
    let mut plan = make_windows_in(
        in_sample_end - cfg.objective_hours..n,
        cfg.objective_hours,
        cfg.max_lead(),
        cfg.window_stride,
    )?;
    if let Some(m) = cfg.max_windows {
        plan.windows.truncate(m.max(1));
    }
    Ok(plan)
}

/// Density forecasts for leads `1..=horizon`, each lead taken from the model
/// the gate picks with that lead's threshold.
pub fn gated_forecast(
    train: &[f64],
    horizon: usize,
    cfg: &ForecastConfig,
    selector: &ModelSelector,
    seed: u64,
) -> Result<Vec<DensityForecast>> {
    let c = forecast_candidates(train, horizon, cfg, seed)?;
    (1..=horizon)
        .map(|lead| {
            c.choose(lead, selector.threshold(lead))
                .map(|(_, f)| f.clone())
                .ok_or_else(|| invalid(format!("no forecast at lead {lead}")))
        })
        .collect()
}

const STAGE_DELTA: u64 = 1;
const STAGE_POINT: u64 = 2;
const STAGE_FV: u64 = 3;
const STAGE_GA: u64 = 4;
const STAGE_RANDOM: u64 = 5;
const STAGE_EVAL: u64 = 6;

struct Selected {
    approach: Approach,
    lead: usize,
    partition: Partition,
    selection: SelectionVector,
    objective: Option<f64>,
}

fn tuning_groups(n: usize, count: usize, max_size: usize, seed: u64) -> Vec<Vec<usize>> {
    let max_size = max_size.min(n).max(1);
    (0..count)
        .map(|g| {
            let frac = if count > 1 {
                g as f64 / (count - 1) as f64
            } else {
                1.0
            };
            let size = ((max_size as f64).powf(frac).round() as usize).clamp(1, max_size);
            let mut rng = derive_rng(seed, &[STAGE_DELTA, g as u64]);
            let mut idx: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
            idx.truncate(size);
            idx.sort_unstable();
            idx
        })
        .collect()
}

/// Runs the whole selection and evaluation on `panel`. The last
/// `out_of_sample_hours` hours are only used for scoring.
pub fn build_frontier(panel: &Panel, cfg: &FrontierConfig) -> Result<Frontier> {
    cfg.validate()?;
    let n = panel.len();
    let plan = out_of_sample_plan(n, cfg)?;
    let in_sample_end = n - cfg.out_of_sample_hours;
    let span = in_sample_end - cfg.objective_hours..in_sample_end;
    let leads = cfg.lead_times.clone();
    let max_lead = cfg.max_lead();
    let seed = cfg.seed;

    // gate threshold per lead, tuned in sample on random household groups
    let groups = tuning_groups(
        panel.n_households(),
        cfg.delta_tuning_series,
        cfg.ga.max_selected,
        seed,
    );
    let tuning_series: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            aggregate_weights(
                panel,
                SelectionVector::from_indices(panel.n_households(), g).weights(),
                AggregateMode::Sum,
            )
        })
        .collect::<Result<_>>()?;
    let tuning_plan = make_windows_in(
        0..in_sample_end,
        cfg.objective_hours,
        max_lead,
        cfg.delta_tuning_stride,
    )?;
    let threshold = tune_threshold(
        &tuning_series,
        &tuning_plan,
        &leads,
        &cfg.delta_grid,
        &cfg.forecast,
        derive_seed(seed, &[STAGE_DELTA]),
    )?;
    let selector = threshold.selector.clone();
    log::info!("gate thresholds {:?}", selector.thresholds);

    // household point forecasts and partitions
    let history = panel.slice_rows(span.clone());
    let points = household_point_forecasts(
        &history,
        &leads,
        &cfg.forecast,
        &selector,
        derive_seed(seed, &[STAGE_POINT]),
    )?;
    let mut partitions = Vec::new();
    let mut failures = Vec::new();
    let mut skipped = Vec::new();
    let mut problems: Vec<(usize, Vec<Partition>, Vec<f64>)> = Vec::new();
    for &lead in &leads {
        let f = points
            .at(lead)
            .expect("point forecasts for every lead")
            .to_vec();
        let parts = partition_demand_range(&f, cfg.partitions, lead)?;
        let mut reachable = Vec::new();
        for p in &parts {
            if partition_reachable(p, &f, cfg.ga.max_selected) {
                reachable.push(*p);
            } else {
                for &a in &cfg.approaches {
                    skipped.push(CellFailure {
                        approach: a,
                        lead_time: lead,
                        partition: p.index,
                        message: format!(
                            "no selection of at most {} households is feasible",
                            cfg.ga.max_selected
                        ),
                    });
                }
            }
        }
        partitions.extend(parts);
        problems.push((lead, reachable, f));
    }

    log::info!(
        "{} partitions reachable, {} point-forecast fallbacks",
        problems.iter().map(|p| p.1.len()).sum::<usize>(),
        points.fallbacks.len()
    );
    let objective_panel = history;
    let ga_for = |a: Approach| -> GaConfig {
        let base = if a.binary() == Approach::Fv {
            cfg.fv_ga.as_ref().unwrap_or(&cfg.ga)
        } else {
            &cfg.ga
        };
        GaConfig {
            seed: derive_seed(seed, &[STAGE_GA, a.code()]),
            ..base.clone()
        }
    };
    let mut chosen: Vec<Selected> = Vec::new();
    let mut record = |a: Approach,
                      lead: usize,
                      p: &Partition,
                      r: Result<GaResult>,
                      chosen: &mut Vec<Selected>| match r {
        Ok(g) => {
            debug_assert!(p.contains(g.expected_demand));
            chosen.push(Selected {
                approach: a,
                lead,
                partition: *p,
                selection: g.selection,
                objective: Some(g.objective),
            })
        }
        Err(e) => {
            log::warn!("{a} at lead {lead}, partition {}: {e}", p.index);
            failures.push(CellFailure {
                approach: a,
                lead_time: lead,
                partition: p.index,
                message: e.to_string(),
            })
        }
    };

    let want = |a: Approach| cfg.wants(a);
    let need_sr = want(Approach::Sr)
        || want(Approach::SrRelaxed)
        || want(Approach::Fv)
        || want(Approach::FvRelaxed);
    let need_ss = want(Approach::Ss)
        || want(Approach::SsRelaxed)
        || want(Approach::Fv)
        || want(Approach::FvRelaxed);
    let need_fv = need_ss || want(Approach::Fv) || want(Approach::FvRelaxed);

    let fv = if need_fv {
        Some(FvObjective::new(
            objective_panel.clone(),
            &leads,
            selector.clone(),
            cfg.fv.clone(),
            derive_seed(seed, &[STAGE_FV]),
        )?)
    } else {
        None
    };

    // SR: lead-independent objective, optimized per (lead, partition)
    let mut sr_best: HashMap<(usize, usize), SelectionVector> = HashMap::new();
    if need_sr {
        let sr = Memoized::new(
            SrObjective::new(objective_panel.clone(), cfg.rsd_denominator)
                .with_periods(cfg.forecast.periods.clone()),
        );
        for (lead, parts, f) in &problems {
            for p in parts {
                let r = ga_optimize_seeded(&sr, p, f, &ga_for(Approach::Sr), &[]);
                if let Ok(g) = &r {
                    sr_best.insert((*lead, p.index), g.selection.clone());
                    if want(Approach::SrRelaxed) {
                        let rr = ga_optimize_relaxed(
                            &sr,
                            p,
                            f,
                            &ga_for(Approach::SrRelaxed),
                            std::slice::from_ref(&g.selection),
                        );
                        record(Approach::SrRelaxed, *lead, p, rr, &mut chosen);
                    }
                }
                if want(Approach::Sr) {
                    record(Approach::Sr, *lead, p, r, &mut chosen);
                }
            }
        }
        log::info!("SR done: {} distinct selections evaluated", sr.cached());
    }

    // SS: weight tuned per lead against FV validation CRPS
    let mut ss_best: HashMap<(usize, usize), SelectionVector> = HashMap::new();
    let mut ss_config = SsConfig {
        weighting: cfg.ss_weighting,
        ..SsConfig::default()
    };
    let mut ss_table = Vec::new();
    if need_ss {
        let fv = fv.as_ref().expect("FV objective built for SS tuning");
        let ss = SsObjective::new(&objective_panel, cfg.rsd_denominator);
        let lead_problems: Vec<LeadProblem> = problems
            .iter()
            .map(|(lead, parts, f)| LeadProblem {
                lead: *lead,
                partitions: parts.clone(),
                forecasts: f,
            })
            .collect();
        log::info!("tuning SS weights over {:?}", cfg.r_grid);
        let tuning = tune_ss_weight(
            &ss,
            &lead_problems,
            &cfg.r_grid,
            cfg.ss_weighting,
            &ga_for(Approach::Ss),
            |v, lead| fv.for_lead(lead).map_or(f64::INFINITY, |o| o.evaluate(v)),
        )?;
        log::info!("SS weights {:?}", tuning.config.weights);
        for (lead, parts, f) in &problems {
            let r = tuning.config.weight(*lead);
            let objective = ss.with_weight(r, *lead, cfg.ss_weighting)?;
            for p in parts {
                let res = tuning
                    .chosen(*lead, p.index)
                    .cloned()
                    .ok_or(Error::Infeasible {
                        violation: f64::NAN,
                        objective: f64::NAN,
                    });
                if let Ok(g) = &res {
                    ss_best.insert((*lead, p.index), g.selection.clone());
                    if want(Approach::SsRelaxed) {
                        let rr = ga_optimize_relaxed(
                            &objective,
                            p,
                            f,
                            &ga_for(Approach::SsRelaxed),
                            std::slice::from_ref(&g.selection),
                        );
                        record(Approach::SsRelaxed, *lead, p, rr, &mut chosen);
                    }
                }
                if want(Approach::Ss) {
                    record(Approach::Ss, *lead, p, res, &mut chosen);
                }
            }
        }
        ss_config = tuning.config;
        ss_table = tuning.table;
    }

    // FV: per (lead, partition), warm-started from the SR and SS portfolios
    if want(Approach::Fv) || want(Approach::FvRelaxed) {
        let fv = fv.as_ref().expect("FV objective built");
        for (lead, parts, f) in &problems {
            let objective = fv.for_lead(*lead)?;
            for p in parts {
                let seeds: Vec<SelectionVector> = [
                    sr_best.get(&(*lead, p.index)),
                    ss_best.get(&(*lead, p.index)),
                ]
                .into_iter()
                .flatten()
                .cloned()
                .collect();
                let r = ga_optimize_seeded(&objective, p, f, &ga_for(Approach::Fv), &seeds);
                if want(Approach::FvRelaxed) {
                    if let Ok(g) = &r {
                        let rr = ga_optimize_relaxed(
                            &objective,
                            p,
                            f,
                            &ga_for(Approach::FvRelaxed),
                            std::slice::from_ref(&g.selection),
                        );
                        record(Approach::FvRelaxed, *lead, p, rr, &mut chosen);
                    }
                }
                if want(Approach::Fv) {
                    record(Approach::Fv, *lead, p, r, &mut chosen);
                }
            }
            log::info!(
                "FV done for lead {lead}: {} distinct selections evaluated",
                fv.cached()
            );
        }
    }

    // random feasible baseline
    if want(Approach::Random) {
        for (lead, parts, f) in &problems {
            for p in parts {
                let mut rng = derive_rng(seed, &[STAGE_RANDOM, *lead as u64, p.index as u64]);
                let mut drawn = 0;
                for _ in 0..cfg.random_samples {
                    match random_feasible_selection(p, f, cfg.ga.max_selected, &mut rng, 1000) {
                        Some(v) => {
                            drawn += 1;
                            chosen.push(Selected {
                                approach: Approach::Random,
                                lead: *lead,
                                partition: *p,
                                selection: v,
                                objective: None,
                            });
                        }
                        None => break,
                    }
                }
                if drawn == 0 {
                    failures.push(CellFailure {
                        approach: Approach::Random,
                        lead_time: *lead,
                        partition: p.index,
                        message: "no random feasible portfolio found".into(),
                    });
                }
            }
        }
    }

    log::info!("evaluating {} portfolios out of sample", chosen.len());
    // out-of-sample evaluation, once per distinct selection
    let mut evaluations: HashMap<(SelectionMode, Vec<u64>), WindowEvaluation> = HashMap::new();
    let eval_seed = derive_seed(seed, &[STAGE_EVAL]);
    let forecaster = |train: &[f64], horizon: usize, window: usize| {
        gated_forecast(
            train,
            horizon,
            &cfg.forecast,
            &selector,
            derive_seed(eval_seed, &[window as u64]),
        )
    };
    let total = chosen.len();
    let mut out_points = Vec::with_capacity(total);
    for (i, s) in chosen.into_iter().enumerate() {
        let key = (s.selection.mode(), s.selection.key());
        if !evaluations.contains_key(&key) {
            let series = aggregate_weights(panel, s.selection.weights(), AggregateMode::Sum)?;
            let e = crate::score::evaluate_windows(&series, &plan, &leads, &forecaster, cfg.point)?;
            evaluations.insert(key.clone(), e);
            if evaluations.len() % 25 == 0 {
                log::info!(
                    "evaluated {} portfolios ({}/{total} cells)",
                    evaluations.len(),
                    i + 1
                );
            }
        }
        let e = &evaluations[&key];
        let f = &problems
            .iter()
            .find(|(l, _, _)| *l == s.lead)
            .expect("lead problem")
            .2;
        match e.summary(s.lead) {
            Some((crps, mae, windows)) => out_points.push(FrontierPoint {
                approach: s.approach,
                lead_time: s.lead,
                partition: s.partition.index,
                lower: s.partition.lower,
                upper: s.partition.upper,
                expected_demand: s.selection.dot(f),
                crps,
                mae,
                windows,
                objective: s.objective,
                selection: s.selection,
            }),
            None => failures.push(CellFailure {
                approach: s.approach,
                lead_time: s.lead,
                partition: s.partition.index,
                message: format!(
                    "every evaluation window failed ({} failures)",
                    e.failures.len()
                ),
            }),
        }
    }
    out_points.sort_by(|a, b| {
        (a.approach, a.lead_time, a.partition).cmp(&(b.approach, b.lead_time, b.partition))
    });
    failures.sort_by(|a, b| {
        (a.approach, a.lead_time, a.partition).cmp(&(b.approach, b.lead_time, b.partition))
    });

    Ok(Frontier {
        household_ids: panel.household_ids().to_vec(),
        partitions,
        points: out_points,
        failures,
        skipped,
        thresholds: selector,
        threshold_table: threshold.table,
        ss: ss_config,
        ss_table,
        point_fallbacks: points.fallbacks,
        windows: plan.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approach_names_round_trip() {
        for a in Approach::ALL {
            assert_eq!(a.name().parse::<Approach>().unwrap(), a);
            assert_eq!(
                serde_json::to_string(&a).unwrap(),
                format!("\"{}\"", a.name())
            );
        }
        assert!("best".parse::<Approach>().is_err());
        assert_eq!(Approach::SrRelaxed.binary(), Approach::Sr);
    }

    #[test]
    fn out_of_sample_targets_follow_the_in_sample_part() {
        let cfg = FrontierConfig::default();
        let n = 26 * HOURS_PER_WEEK;
        let plan = out_of_sample_plan(n, &cfg).unwrap();
        let end = n - cfg.out_of_sample_hours;
        assert_eq!(plan.windows[0].train_end, end);
        assert!(plan
            .windows
            .iter()
            .all(|w| w.train().len() == cfg.objective_hours && w.test_end <= n));
        assert_eq!(plan.len(), 10);
        assert!(out_of_sample_plan(cfg.required_hours() - 1, &cfg).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let point = FrontierPoint {
            approach: Approach::SrRelaxed,
            lead_time: 4,
            partition: 2,
            lower: 1.0,
            upper: 2.0,
            expected_demand: 1.5,
            crps: 0.25,
            mae: 0.3,
            windows: 3,
            objective: Some(0.1),
            selection: SelectionVector::relaxed(vec![0.0, 0.5, 1.0]).unwrap(),
        };
        let frontier = Frontier {
            household_ids: vec!["a".into(), "b".into(), "c".into()],
            partitions: vec![],
            points: vec![point],
            failures: vec![],
            skipped: vec![],
            thresholds: ModelSelector::default(),
            threshold_table: vec![],
            ss: SsConfig::default(),
            ss_table: vec![],
            point_fallbacks: vec![],
            windows: 3,
        };
        let mut buf = Vec::new();
        frontier.write_csv(&mut buf).unwrap();
        let rows = read_frontier_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(
            (rows[0].approach, rows[0].selection_bitmap.as_str()),
            (Approach::SrRelaxed, "011")
        );
        assert_eq!(rows[0].crps_kw, 0.25);
        let mut json = Vec::new();
        frontier.write_json(&mut json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(v[0]["selection"]["b"], 0.5);
        let bad = String::from_utf8(buf).unwrap().replace("011", "0x1");
        assert!(read_frontier_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn tuning_groups_span_sizes() {
        let g = tuning_groups(200, 4, 100, 1);
        let sizes: Vec<usize> = g.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![1, 5, 22, 100]);
        assert_eq!(g, tuning_groups(200, 4, 100, 1));
    }
}

//! Portfolio objectives: forecast validated (FV), seasonal residual (SR) and
//! seasonal similarity (SS).

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::selection::{SelectionMode, SelectionVector};
use crate::data::{aggregate_weights, AggregateMode, Panel};
use crate::decompose::{multi_stl, project_components, DEMAND_PERIODS};
use crate::error::{invalid, Error, Result};
use crate::forecast::{
    compose_forecast, fit_remainder, kde_forecast, CandidateForecasts, DensityForecast,
    ForecastConfig, ModelSelector,
};
use crate::rng::{derive_rng, derive_seed};
use crate::score::crps_ensemble;
use crate::stats::{is_prime, mean, std_dev};

/// A portfolio objective to be minimized. Undefined values are `+inf`.
pub trait Objective: Sync {
    fn evaluate(&self, selection: &SelectionVector) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&SelectionVector) -> f64 + Sync,
{
    fn evaluate(&self, selection: &SelectionVector) -> f64 {
        self(selection)
    }
}

type Key = (SelectionMode, Vec<u64>);

fn key(v: &SelectionVector) -> Key {
    (v.mode(), v.key())
}

/// Caches an objective by exact selection identity.
pub struct Memoized<O> {
    inner: O,
    cache: Mutex<HashMap<Key, f64>>,
}

impl<O: Objective> Memoized<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }
}

impl<O: Objective> Objective for Memoized<O> {
    fn evaluate(&self, selection: &SelectionVector) -> f64 {
        let k = key(selection);
        if let Some(v) = self.cache.lock().ok().and_then(|c| c.get(&k).copied()) {
            return v;
        }
        let v = self.inner.evaluate(selection);
        if let Ok(mut c) = self.cache.lock() {
            c.insert(k, v);
        }
        v
    }
}

/// Mean level a standard deviation is divided by.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RsdDenominator {
    /// Mean of the (aggregated or household) demand.
    #[default]
    DemandMean,
    /// Absolute mean of the dispersed component itself.
    ComponentMean,
}

/// How the SS weight for lead `h` enters the objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsWeighting {
    /// `r_h` is a weight chosen per lead time.
    #[default]
    PerLead,
    /// `r` raised to the power `h`.
    Power,
}

fn rsd(component: &[f64], demand_mean: f64, denominator: RsdDenominator) -> Result<f64> {
    let level = match denominator {
        RsdDenominator::DemandMean => demand_mean,
        RsdDenominator::ComponentMean => mean(component).abs(),
    };
    if !(level > 0.0) || !level.is_finite() {
        return Err(Error::Degenerate(format!(
            "RSD level {level} is not positive"
        )));
    }
    Ok(std_dev(component) / level)
}

/// Seasonal-residual objective: RSD of the STL remainder of the aggregate.
#[derive(Debug, Clone)]
pub struct SrObjective {
    span: Panel,
    denominator: RsdDenominator,
    periods: Vec<usize>,
}

impl SrObjective {
    pub fn new(span: Panel, denominator: RsdDenominator) -> Self {
        Self {
            span,
            denominator,
            periods: DEMAND_PERIODS.to_vec(),
        }
    }

    pub fn with_periods(mut self, periods: Vec<usize>) -> Self {
        self.periods = periods;
        self
    }

    pub fn value(&self, v: &SelectionVector) -> Result<f64> {
        let agg = aggregate_weights(&self.span, v.weights(), AggregateMode::Sum)?;
        let d = multi_stl(&agg, &self.periods)?;
        rsd(&d.remainder, mean(&agg), self.denominator)
    }
}

impl Objective for SrObjective {
    fn evaluate(&self, v: &SelectionVector) -> f64 {
        self.value(v).unwrap_or(f64::INFINITY)
    }
}

/// `std(R) / mean(Y v)` of the summed selection over `panel`.
pub fn objective_sr(panel: &Panel, v: &SelectionVector) -> Result<f64> {
    SrObjective::new(panel.clone(), RsdDenominator::DemandMean).value(v)
}

/// Per-household RSDs of the systematic (seasonal + trend) part and of the
/// remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdDispersion {
    pub systematic: f64,
    pub remainder: f64,
}

pub fn household_dispersion(
    series: &[f64],
    periods: &[usize],
    denominator: RsdDenominator,
) -> Result<HouseholdDispersion> {
    let d = multi_stl(series, periods)?;
    let m = mean(series);
    Ok(HouseholdDispersion {
        systematic: rsd(&d.systematic(), m, denominator)?,
        remainder: rsd(&d.remainder, m, denominator)?,
    })
}

/// Seasonal-similarity objective over precomputed household dispersions:
/// `w mean(RSD(S + T)) + (1 - w) mean(RSD(R))` over selected households,
/// weighted by their selection weights.
#[derive(Debug, Clone)]
pub struct SsObjective {
    dispersion: Vec<Option<HouseholdDispersion>>,
    weight: f64,
}

impl SsObjective {
    pub fn new(span: &Panel, denominator: RsdDenominator) -> Self {
        let dispersion = span
            .columns()
            .iter()
            .map(|c| household_dispersion(c, &DEMAND_PERIODS, denominator).ok())
            .collect();
        Self {
            dispersion,
            weight: 1.0,
        }
    }

    pub fn from_dispersion(dispersion: Vec<Option<HouseholdDispersion>>) -> Self {
        Self {
            dispersion,
            weight: 1.0,
        }
    }

    /// The objective with the systematic term weighted by `r` for lead `lead`.
    pub fn with_weight(&self, r: f64, lead: usize, weighting: SsWeighting) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(invalid(format!("SS weight {r} outside [0, 1]")));
        }
        let weight = match weighting {
            SsWeighting::PerLead => r,
            SsWeighting::Power => r.powi(lead as i32),
        };
        Ok(Self {
            dispersion: self.dispersion.clone(),
            weight,
        })
    }

    pub fn dispersion(&self) -> &[Option<HouseholdDispersion>] {
        &self.dispersion
    }

    pub fn value(&self, v: &SelectionVector) -> Result<f64> {
        if v.len() != self.dispersion.len() {
            return Err(invalid("selection length does not match the panel"));
        }
        let (mut sys, mut rem, mut total) = (0.0, 0.0, 0.0);
        for i in v.selected() {
            let w = v.weights()[i];
            let d = self.dispersion[i]
                .as_ref()
                .ok_or_else(|| Error::Degenerate(format!("household {i} has no dispersion")))?;
            sys += w * d.systematic;
            rem += w * d.remainder;
            total += w;
        }
        if total <= 0.0 {
            return Err(invalid("selection contains no household"));
        }
        Ok(self.weight * sys / total + (1.0 - self.weight) * rem / total)
    }
}

impl Objective for SsObjective {
    fn evaluate(&self, v: &SelectionVector) -> f64 {
        self.value(v).unwrap_or(f64::INFINITY)
    }
}

/// SS objective of `v` on `panel` with weight `r`.
pub fn objective_ss(panel: &Panel, v: &SelectionVector, r: f64) -> Result<f64> {
    let selected: Vec<usize> = v.selected().collect();
    let sub = panel.select_columns(&selected);
    let obj = SsObjective::new(&sub, RsdDenominator::DemandMean).with_weight(
        r,
        1,
        SsWeighting::PerLead,
    )?;
    let w: Vec<f64> = selected.iter().map(|&i| v.weights()[i]).collect();
    obj.value(&SelectionVector::relaxed(w)?)
}

/// Validation forecasts for FV: given the training part and the following
/// validation part of a series, forecasts leads `1..=max_lead` from each
/// origin (an offset into the validation part).
pub trait ValidationForecaster: Sync {
    fn forecast_origins(
        &self,
        train: &[f64],
        validation: &[f64],
        origins: &[usize],
        max_lead: usize,
    ) -> Result<Vec<CandidateForecasts>>;
}

/// Fits once on the training part; later origins condition the fitted
/// ARMA-GARCH on the validation values seen so far (parameters held fixed).
/// Seasonal and trend come from projecting the training decomposition.
#[derive(Debug, Clone)]
pub struct FixedParameterForecaster {
    pub config: ForecastConfig,
    pub seed: u64,
}

impl ValidationForecaster for FixedParameterForecaster {
    fn forecast_origins(
        &self,
        train: &[f64],
        validation: &[f64],
        origins: &[usize],
        max_lead: usize,
    ) -> Result<Vec<CandidateForecasts>> {
        let cfg = &self.config;
        let d = multi_stl(train, &cfg.periods)?;
        let (seasonal, trend) = project_components(&d, validation.len());
        let systematic: Vec<f64> = seasonal.iter().zip(&trend).map(|(s, t)| s + t).collect();
        let fitted = fit_remainder(&d.remainder, cfg);
        let kde_ensemble = match &fitted.kde {
            Ok(k) => Some(
                kde_forecast(k, 1, cfg.ensemble_size, derive_seed(self.seed, &[u64::MAX]))?
                    .remove(0),
            ),
            Err(_) => None,
        };
        let (garch, p_value, garch_error) = match &fitted.garch {
            Ok((m, p)) => (Some(m), Some(*p), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
        if garch.is_none() && kde_ensemble.is_none() {
            return Err(Error::FitFailed(format!(
                "no model for the validation split: {}",
                garch_error.unwrap_or_default()
            )));
        }
        let pseudo: Vec<f64> = validation
            .iter()
            .zip(&systematic)
            .map(|(y, s)| y - s)
            .collect();
        let mut state = garch.cloned();
        let mut seen = 0;
        let mut out = Vec::with_capacity(origins.len());
        for &o in origins {
            if o + max_lead > validation.len() || o < seen {
                return Err(invalid(format!(
                    "origin {o} outside the validation split or out of order"
                )));
            }
            let shift = &systematic[o..o + max_lead];
            let zeros = vec![0.0; max_lead];
            let garch_fc = match state.as_mut() {
                Some(m) => {
                    *m = m.advance(&pseudo[seen..o]);
                    let mut rng = derive_rng(self.seed, &[o as u64]);
                    let paths = m.simulate(max_lead, cfg.ensemble_size, &mut rng)?;
                    let raw: Vec<DensityForecast> = paths
                        .into_iter()
                        .enumerate()
                        .map(|(h, e)| DensityForecast::new(h + 1, e))
                        .collect::<Result<_>>()?;
                    Some(compose_forecast(&raw, shift, &zeros)?)
                }
                None => None,
            };
            seen = o;
            let kde_fc = match &kde_ensemble {
                Some(e) => Some(
                    (0..max_lead)
                        .map(|h| {
                            DensityForecast::new(
                                h + 1,
                                e.ensemble.iter().map(|x| x + shift[h]).collect(),
                            )
                        })
                        .collect::<Result<Vec<_>>>()?,
                ),
                None => None,
            };
            out.push(CandidateForecasts {
                garch: garch_fc,
                kde: kde_fc,
                orders: garch.map(|m| (m.p(), m.q())),
                p_value,
                garch_error: garch_error.clone(),
            });
        }
        Ok(out)
    }
}

/// Where FV validates inside the in-sample span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FvConfig {
    /// Trailing fraction of the span held out for validation.
    pub validation_fraction: f64,
    /// Spacing of validation origins in hours: 1 (every hour) or a prime.
    pub origin_stride: usize,
    pub forecast: ForecastConfig,
}

impl Default for FvConfig {
    fn default() -> Self {
        Self {
            validation_fraction: 0.25,
            origin_stride: 1,
            forecast: ForecastConfig {
                ensemble_size: 100,
                ..ForecastConfig::default()
            },
        }
    }
}

impl FvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(invalid("validation fraction must lie in (0, 1)"));
        }
        if self.origin_stride != 1 && !is_prime(self.origin_stride) {
            return Err(Error::NotPrime(self.origin_stride));
        }
        self.forecast.validate()
    }
}

/// Mean validation CRPS at each lead over origins `0, stride, 2 stride, ...`
/// of the validation part; model choice per lead follows `selector`.
pub fn validation_crps<F: ValidationForecaster + ?Sized>(
    series: &[f64],
    split: usize,
    leads: &[usize],
    stride: usize,
    selector: &ModelSelector,
    forecaster: &F,
) -> Result<Vec<f64>> {
    if split == 0 || split >= series.len() {
        return Err(invalid(format!(
            "split {split} outside the {}-point series",
            series.len()
        )));
    }
    let max_lead = leads
        .iter()
        .copied()
        .max()
        .ok_or_else(|| invalid("no lead times"))?;
    let (train, validation) = series.split_at(split);
    if validation.len() < max_lead {
        return Err(Error::TooShort {
            required: split + max_lead,
            actual: series.len(),
        });
    }
    let origins: Vec<usize> = (0..=validation.len() - max_lead)
        .step_by(stride.max(1))
        .collect();
    let fc = forecaster.forecast_origins(train, validation, &origins, max_lead)?;
    leads
        .iter()
        .map(|&lead| {
            let delta = selector.threshold(lead);
            let mut total = 0.0;
            for (c, &o) in fc.iter().zip(&origins) {
                let (_, f) = c
                    .choose(lead, delta)
                    .ok_or_else(|| invalid(format!("no validation forecast at lead {lead}")))?;
                total += crps_ensemble(&f.ensemble, validation[o + lead - 1])?;
            }
            Ok(total / origins.len() as f64)
        })
        .collect()
}

/// Forecast-validated objective: validation CRPS of the summed selection,
/// memoized per selection for every configured lead at once.
pub struct FvObjective {
    span: Panel,
    leads: Vec<usize>,
    selector: ModelSelector,
    config: FvConfig,
    forecaster: Box<dyn ValidationForecaster>,
    cache: Mutex<HashMap<Key, Option<Vec<f64>>>>,
}

impl FvObjective {
    pub fn new(
        span: Panel,
        leads: &[usize],
        selector: ModelSelector,
        config: FvConfig,
        seed: u64,
    ) -> Result<Self> {
        let forecaster = FixedParameterForecaster {
            config: config.forecast.clone(),
            seed,
        };
        Self::with_forecaster(span, leads, selector, config, Box::new(forecaster))
    }

    pub fn with_forecaster(
        span: Panel,
        leads: &[usize],
        selector: ModelSelector,
        config: FvConfig,
        forecaster: Box<dyn ValidationForecaster>,
    ) -> Result<Self> {
        config.validate()?;
        if leads.is_empty() {
            return Err(invalid("FV needs at least one lead time"));
        }
        Ok(Self {
            span,
            leads: leads.to_vec(),
            selector,
            config,
            forecaster,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn split(&self) -> usize {
        let n = self.span.len();
        n - (self.config.validation_fraction * n as f64).round() as usize
    }

    pub fn leads(&self) -> &[usize] {
        &self.leads
    }

    /// Validation CRPS at every configured lead, or `None` when forecasting fails.
    pub fn scores(&self, v: &SelectionVector) -> Option<Vec<f64>> {
        let k = key(v);
        if let Some(hit) = self.cache.lock().ok().and_then(|c| c.get(&k).cloned()) {
            return hit;
        }
        let computed = (|| {
            let agg = aggregate_weights(&self.span, v.weights(), AggregateMode::Sum)?;
            validation_crps(
                &agg,
                self.split(),
                &self.leads,
                self.config.origin_stride,
                &self.selector,
                self.forecaster.as_ref(),
            )
        })();
        let value = match computed {
            Ok(s) => Some(s),
            Err(e) => {
                log::debug!(
                    "FV objective undefined for a selection of {}: {e}",
                    v.count()
                );
                None
            }
        };
        if let Ok(mut c) = self.cache.lock() {
            c.insert(k, value.clone());
        }
        value
    }

    /// The objective at one lead time.
    pub fn for_lead(&self, lead: usize) -> Result<FvLeadObjective<'_>> {
        let index = self
            .leads
            .iter()
            .position(|&l| l == lead)
            .ok_or_else(|| invalid(format!("lead {lead} not configured for FV")))?;
        Ok(FvLeadObjective { fv: self, index })
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }
}

pub struct FvLeadObjective<'a> {
    fv: &'a FvObjective,
    index: usize,
}

impl Objective for FvLeadObjective<'_> {
    fn evaluate(&self, v: &SelectionVector) -> f64 {
        self.fv.scores(v).map_or(f64::INFINITY, |s| s[self.index])
    }
}

/// FV objective of `v` on `panel` (training part = first `split` hours) at
/// one lead time.
pub fn objective_fv(
    panel: &Panel,
    v: &SelectionVector,
    split: usize,
    lead: usize,
    selector: &ModelSelector,
    config: &FvConfig,
    seed: u64,
) -> Result<f64> {
    config.validate()?;
    let agg = aggregate_weights(panel, v.weights(), AggregateMode::Sum)?;
    let forecaster = FixedParameterForecaster {
        config: config.forecast.clone(),
        seed,
    };
    Ok(validation_crps(
        &agg,
        split,
        &[lead],
        config.origin_stride,
        selector,
        &forecaster,
    )?[0])
}

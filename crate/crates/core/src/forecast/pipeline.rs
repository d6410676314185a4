//! Decompose, fit both candidate models, forecast and re-compose.

use serde::{Deserialize, Serialize};

use super::arma::select_arma_order;
use super::density::{compose_forecast, DensityForecast};
use super::garch::{fit_arma_garch_with, forecast_density, ArmaGarchModel, FitOptions};
use super::gof::{gof_pvalue, DEFAULT_BINS};
use super::kde::{fit_kde, kde_forecast, KdeModel};
use super::select::{decide, ModelKind};
use crate::decompose::{multi_stl, project_components, DEMAND_PERIODS};
use crate::error::{invalid, Error, Result};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub periods: Vec<usize>,
    pub max_p: usize,
    pub max_q: usize,
    pub ensemble_size: usize,
    pub gof_bins: usize,
    pub max_iterations: usize,
    pub restarts: usize,
    /// Most recent remainder values used by the KDE; all when absent.
    pub kde_window: Option<usize>,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            periods: DEMAND_PERIODS.to_vec(),
            max_p: 3,
            max_q: 3,
            ensemble_size: 1000,
            gof_bins: DEFAULT_BINS,
            max_iterations: 500,
            restarts: 1,
            kde_window: None,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.periods.is_empty() || self.periods.iter().any(|&p| p < 2) {
            return Err(invalid("seasonal periods must be at least 2"));
        }
        if self.ensemble_size == 0 {
            return Err(invalid("ensemble size must be positive"));
        }
        if self.gof_bins < 2 {
            return Err(invalid("at least two goodness-of-fit bins are required"));
        }
        if self.kde_window.is_some_and(|w| w < 2) {
            return Err(invalid("KDE window must hold at least two values"));
        }
        Ok(())
    }
}

/// Both candidate forecasts of one training series, already re-composed with
/// the projected seasonal and trend components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateForecasts {
    pub garch: Option<Vec<DensityForecast>>,
    pub kde: Option<Vec<DensityForecast>>,
    pub orders: Option<(usize, usize)>,
    pub p_value: Option<f64>,
    /// Why the ARMA-GARCH candidate is missing, when it is.
    pub garch_error: Option<String>,
}

impl CandidateForecasts {
    /// The forecast for `lead` chosen by the threshold rule, falling back to
    /// whichever candidate exists.
    pub fn choose(&self, lead: usize, delta: f64) -> Option<(ModelKind, &DensityForecast)> {
        let preferred = decide(self.garch.as_ref().and(self.p_value), delta);
        let pick = |kind: ModelKind| {
            let set = match kind {
                ModelKind::ArmaGarch => self.garch.as_ref(),
                ModelKind::Kde => self.kde.as_ref(),
            }?;
            set.iter().find(|f| f.lead_time == lead).map(|f| (kind, f))
        };
        pick(preferred).or_else(|| {
            pick(match preferred {
                ModelKind::ArmaGarch => ModelKind::Kde,
                ModelKind::Kde => ModelKind::ArmaGarch,
            })
        })
    }
}

/// Fitted remainder models of one series.
#[derive(Debug)]
pub struct FittedRemainder {
    pub garch: Result<(ArmaGarchModel, f64)>,
    pub kde: Result<KdeModel>,
    pub remainder: Vec<f64>,
}

/// Fits ARMA-GARCH (orders by BIC) and KDE to a remainder series.
pub fn fit_remainder(remainder: &[f64], cfg: &ForecastConfig) -> FittedRemainder {
    let garch = (|| {
        let sel = select_arma_order(remainder, cfg.max_p, cfg.max_q)?;
        let opts = FitOptions {
            max_iterations: cfg.max_iterations,
            restarts: cfg.restarts,
            initial_mean: Some(sel.coefficients.clone()),
            ..FitOptions::default()
        };
        let model = fit_arma_garch_with(remainder, sel.p, sel.q, &opts)?;
        let p = gof_pvalue(&model, remainder, cfg.gof_bins)?;
        Ok((model, p))
    })();
    let kde_src = match cfg.kde_window {
        Some(w) if w < remainder.len() => &remainder[remainder.len() - w..],
        _ => remainder,
    };
    FittedRemainder {
        garch,
        kde: fit_kde(kde_src),
        remainder: remainder.to_vec(),
    }
}

/// Decomposes `train`, fits both models to the remainder and forecasts
/// leads `1..=horizon`. Fails only when neither model can be fitted.
pub fn forecast_candidates(
    train: &[f64],
    horizon: usize,
    cfg: &ForecastConfig,
    seed: u64,
) -> Result<CandidateForecasts> {
    cfg.validate()?;
    let d = multi_stl(train, &cfg.periods)?;
    let (seasonal, trend) = project_components(&d, horizon);
    let fitted = fit_remainder(&d.remainder, cfg);
    let mut out = CandidateForecasts {
        garch: None,
        kde: None,
        orders: None,
        p_value: None,
        garch_error: None,
    };
    match &fitted.garch {
        Ok((model, p)) => {
            let fc = forecast_density(model, horizon, cfg.ensemble_size, derive_seed(seed, &[0]))?;
            out.garch = Some(compose_forecast(&fc, &seasonal, &trend)?);
            out.orders = Some((model.p(), model.q()));
            out.p_value = Some(*p);
        }
        Err(e) => out.garch_error = Some(e.to_string()),
    }
    let kde_error = match &fitted.kde {
        Ok(k) => {
            let fc = kde_forecast(k, horizon, cfg.ensemble_size, derive_seed(seed, &[1]))?;
            out.kde = Some(compose_forecast(&fc, &seasonal, &trend)?);
            None
        }
        Err(e) => Some(e.to_string()),
    };
    if out.garch.is_none() && out.kde.is_none() {
        return Err(Error::FitFailed(format!(
            "ARMA-GARCH: {}; KDE: {}",
            out.garch_error.as_deref().unwrap_or("-"),
            kde_error.as_deref().unwrap_or("-")
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn forecasts_periodic_series_near_its_pattern() {
        let mut rng = derive_rng(3, &[]);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let y: Vec<f64> = (0..1008)
            .map(|t| 2.0 + (t as f64 * std::f64::consts::TAU / 24.0).sin() + noise.sample(&mut rng))
            .collect();
        let cfg = ForecastConfig {
            ensemble_size: 400,
            ..Default::default()
        };
        let c = forecast_candidates(&y, 24, &cfg, 1).unwrap();
        assert!(c.garch.is_some(), "{:?}", c.garch_error);
        for lead in [1, 6, 24] {
            let (_, f) = c.choose(lead, 0.0).unwrap();
            let truth = 2.0 + ((1008 + lead - 1) as f64 * std::f64::consts::TAU / 24.0).sin();
            assert!(
                (f.mean() - truth).abs() < 0.1,
                "lead {lead}: {} vs {truth}",
                f.mean()
            );
        }
        let (kind, _) = c.choose(1, 1.0).unwrap();
        assert_eq!(kind, ModelKind::Kde);
    }
}

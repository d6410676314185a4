use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::stats::{mean, median, quantile_sorted, sorted_copy};

/// How a point forecast is read off a density forecast.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointForecast {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantilePoint {
    pub level: f64,
    pub value: f64,
}

/// Predictive distribution at one lead time, represented by a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityForecast {
    pub lead_time: usize,
    pub ensemble: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quantiles: Vec<QuantilePoint>,
}

impl DensityForecast {
    pub fn new(lead_time: usize, ensemble: Vec<f64>) -> Result<Self> {
        if ensemble.is_empty() {
            return Err(invalid(
                "density forecast needs at least one ensemble member",
            ));
        }
        if ensemble.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite ensemble member at lead {lead_time}"
            )));
        }
        Ok(Self {
            lead_time,
            ensemble,
            quantiles: Vec::new(),
        })
    }

    /// Attaches empirical quantiles at the given levels.
    pub fn with_quantiles(mut self, levels: &[f64]) -> Self {
        let sorted = sorted_copy(&self.ensemble);
        let mut levels = levels.to_vec();
        levels.sort_by(f64::total_cmp);
        self.quantiles = levels
            .into_iter()
            .map(|level| QuantilePoint {
                level,
                value: quantile_sorted(&sorted, level),
            })
            .collect();
        self
    }

    pub fn mean(&self) -> f64 {
        mean(&self.ensemble)
    }

    pub fn quantile(&self, level: f64) -> f64 {
        quantile_sorted(&sorted_copy(&self.ensemble), level)
    }

    pub fn point(&self, rule: PointForecast) -> f64 {
        match rule {
            PointForecast::Mean => self.mean(),
            PointForecast::Median => median(&self.ensemble),
        }
    }

    /// Every member (and quantile) moved by `shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            lead_time: self.lead_time,
            ensemble: self.ensemble.iter().map(|v| v + shift).collect(),
            quantiles: self
                .quantiles
                .iter()
                .map(|q| QuantilePoint {
                    level: q.level,
                    value: q.value + shift,
                })
                .collect(),
        }
    }
}

/// Adds projected seasonal and trend values to remainder forecasts; the
/// forecast at lead `h` is shifted by `seasonal[h - 1] + trend[h - 1]`.
pub fn compose_forecast(
    remainder: &[DensityForecast],
    seasonal: &[f64],
    trend: &[f64],
) -> Result<Vec<DensityForecast>> {
    if seasonal.len() != trend.len() {
        return Err(invalid(format!(
            "seasonal projection has {} steps, trend {}",
            seasonal.len(),
            trend.len()
        )));
    }
    remainder
        .iter()
        .map(|f| {
            let h = f.lead_time;
            if h == 0 || h > seasonal.len() {
                return Err(invalid(format!(
                    "lead time {h} outside the {}-step projection",
                    seasonal.len()
                )));
            }
            Ok(f.shifted(seasonal[h - 1] + trend[h - 1]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_projection_is_identity() {
        let f = vec![DensityForecast::new(1, vec![1.0, 2.0]).unwrap()];
        assert_eq!(compose_forecast(&f, &[0.0], &[0.0]).unwrap(), f);
    }

    #[test]
    fn quantiles_shift_exactly() {
        let f = DensityForecast::new(2, vec![0.0, 1.0, 4.0, 9.0])
            .unwrap()
            .with_quantiles(&[0.9, 0.1, 0.5]);
        let levels: Vec<f64> = f.quantiles.iter().map(|q| q.level).collect();
        assert_eq!(levels, vec![0.1, 0.5, 0.9]);
        let g = &compose_forecast(std::slice::from_ref(&f), &[0.0, 2.0], &[1.0, 0.5]).unwrap()[0];
        for (a, b) in f.quantiles.iter().zip(&g.quantiles) {
            assert!((b.value - a.value - 2.5).abs() < 1e-12);
        }
        assert!((g.quantile(0.5) - f.quantile(0.5) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatch_and_bad_members() {
        let f = vec![DensityForecast::new(3, vec![1.0]).unwrap()];
        assert!(compose_forecast(&f, &[0.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(compose_forecast(&f, &[0.0; 3], &[0.0; 2]).is_err());
        assert!(DensityForecast::new(1, vec![]).is_err());
        assert!(DensityForecast::new(1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn point_rules() {
        let f = DensityForecast::new(1, vec![0.0, 1.0, 8.0]).unwrap();
        assert_eq!(f.point(PointForecast::Mean), 3.0);
        assert_eq!(f.point(PointForecast::Median), 1.0);
    }
}

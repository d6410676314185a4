//! Unconditional Gaussian kernel density estimate.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::density::DensityForecast;
use crate::error::{invalid, Error, Result};
use crate::rng::derive_rng;
use crate::stats::{iqr, std_dev};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    observations: Vec<f64>,
    bandwidth: f64,
}

/// Silverman's rule of thumb, `0.9 min(sd, IQR / 1.34) W^(-1/5)`; falls back to
/// the standard deviation when the IQR is zero.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let sd = std_dev(xs);
    let spread = iqr(xs) / 1.34;
    let a = if spread > 0.0 { sd.min(spread) } else { sd };
    0.9 * a * (xs.len() as f64).powf(-0.2)
}

/// Fits a KDE to a window of observations with Silverman's bandwidth.
pub fn fit_kde(window: &[f64]) -> Result<KdeModel> {
    if window.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: window.len(),
        });
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(invalid("KDE window contains non-finite values"));
    }
    let h = silverman_bandwidth(window);
    let magnitude = window.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if !(h > 1e-12 * magnitude) {
        return Err(Error::Degenerate("KDE window is constant".into()));
    }
    KdeModel::new(window.to_vec(), h)
}

impl KdeModel {
    pub fn new(observations: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if observations.len() < 2 {
            return Err(Error::TooShort {
                required: 2,
                actual: observations.len(),
            });
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid(format!(
                "KDE bandwidth {bandwidth} must be positive"
            )));
        }
        Ok(Self {
            observations,
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let c = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt() * self.observations.len() as f64);
        c * self
            .observations
            .iter()
            .map(|o| (-0.5 * ((x - o) / h).powi(2)).exp())
            .sum::<f64>()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        self.observations
            .iter()
            .map(|o| 0.5 * erfc(-(x - o) / (h * std::f64::consts::SQRT_2)))
            .sum::<f64>()
            / self.observations.len() as f64
    }

    /// One draw: a uniformly chosen observation plus kernel noise.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let i = rng.random_range(0..self.observations.len());
        let noise = Normal::new(0.0, self.bandwidth).expect("positive bandwidth");
        self.observations[i] + noise.sample(rng)
    }
}

/// The same `m`-member unconditional ensemble for every lead `1..=horizon`.
pub fn kde_forecast(
    model: &KdeModel,
    horizon: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<DensityForecast>> {
    if horizon < 1 || m < 1 {
        return Err(invalid(
            "KDE forecast needs horizon and ensemble size of at least 1",
        ));
    }
    let mut rng = derive_rng(seed, &[]);
    let noise = Normal::new(0.0, model.bandwidth).map_err(|e| invalid(e.to_string()))?;
    let n = model.observations.len();
    let ensemble: Vec<f64> = (0..m)
        .map(|_| model.observations[rng.random_range(0..n)] + noise.sample(&mut rng))
        .collect();
    (1..=horizon)
        .map(|h| DensityForecast::new(h, ensemble.clone()))
        .collect()
}

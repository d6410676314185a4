use statrs::function::erf::erfc;

use crate::error::{invalid, Result};

/// Empirical CRPS of an ensemble, `mean|X - y| - mean|X - X'| / 2`.
///
/// The pairwise term is computed from the sorted sample in `O(M log M)`.
pub fn crps_ensemble(ensemble: &[f64], y: f64) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(invalid("CRPS of an empty ensemble"));
    }
    if !y.is_finite() || ensemble.iter().any(|v| !v.is_finite()) {
        return Err(invalid("CRPS inputs must be finite"));
    }
    let mut sorted = ensemble.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(crps_sorted(&sorted, y))
}

/// [`crps_ensemble`] for an already sorted, finite, non-empty ensemble.
pub fn crps_sorted(sorted: &[f64], y: f64) -> f64 {
    let m = sorted.len() as f64;
    let mut abs_err = 0.0;
    let mut spread = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        abs_err += (x - y).abs();
        spread += (2.0 * k as f64 - m + 1.0) * x;
    }
    (abs_err / m - spread / (m * m)).max(0.0)
}

/// Closed-form CRPS of a normal predictive distribution.
pub fn crps_gaussian(mu: f64, sigma: f64, y: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(invalid(format!("sigma {sigma} must be positive")));
    }
    let z = (y - mu) / sigma;
    let cdf = 0.5 * erfc(-z / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    Ok(sigma * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::f64::consts::PI.sqrt()))
}

/// Mean absolute error.
pub fn mae(forecasts: &[f64], observations: &[f64]) -> Result<f64> {
    if forecasts.len() != observations.len() {
        return Err(invalid(format!(
            "{} forecasts for {} observations",
            forecasts.len(),
            observations.len()
        )));
    }
    if forecasts.is_empty() {
        return Err(invalid("MAE of no forecasts"));
    }
    Ok(forecasts
        .iter()
        .zip(observations)
        .map(|(f, y)| (f - y).abs())
        .sum::<f64>()
        / forecasts.len() as f64)
}

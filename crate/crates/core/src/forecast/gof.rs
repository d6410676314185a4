//! Pearson chi-squared goodness of fit on probability integral transforms.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::garch::ArmaGarchModel;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_BINS: usize = 20;

/// Pearson statistic of PIT values over `bins` equiprobable bins (expected
/// count `n / bins` each).
pub fn pearson_statistic(pit: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(invalid("at least two bins are required"));
    }
    if pit.len() < 5 * bins {
        return Err(Error::TooShort {
            required: 5 * bins,
            actual: pit.len(),
        });
    }
    let mut counts = vec![0usize; bins];
    for &u in pit {
        if !(0.0..=1.0).contains(&u) {
            return Err(invalid(format!("PIT value {u} outside [0, 1]")));
        }
        counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let expected = pit.len() as f64 / bins as f64;
    Ok(counts
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum())
}

/// Upper-tail probability of the Pearson statistic under chi-squared with
/// `bins - 1` degrees of freedom.
pub fn pit_pvalue(pit: &[f64], bins: usize) -> Result<f64> {
    let stat = pearson_statistic(pit, bins)?;
    let chi = ChiSquared::new((bins - 1) as f64).map_err(|e| invalid(e.to_string()))?;
    Ok(chi.sf(stat).clamp(0.0, 1.0))
}

/// Goodness of fit of a fitted model on its training series: the
/// standardized residuals pushed through the fitted innovation cdf.
pub fn gof_pvalue(model: &ArmaGarchModel, series: &[f64], bins: usize) -> Result<f64> {
    let sged = model.params.innovation()?;
    let pit: Vec<f64> = model
        .standardized_residuals(series)
        .into_iter()
        .map(|z| sged.cdf_standard(z))
        .collect();
    pit_pvalue(&pit, bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use rand::Rng;

    #[test]
    fn statistic_uses_equal_expected_counts() {
        // 100 values, 20 bins: 5 expected per bin; all in one bin
        let pit = vec![0.01; 100];
        let stat = pearson_statistic(&pit, 20).unwrap();
        assert!((stat - ((95.0f64).powi(2) / 5.0 + 19.0 * 5.0)).abs() < 1e-9);
        let even: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert_eq!(pearson_statistic(&even, 20).unwrap(), 0.0);
        assert!((pit_pvalue(&even, 20).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_pits_usually_pass() {
        let passes = (0..100)
            .filter(|&s| {
                let mut rng = derive_rng(s, &[]);
                let pit: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
                pit_pvalue(&pit, 20).unwrap() > 0.05
            })
            .count();
        assert!(passes >= 90, "{passes}");
    }

    #[test]
    fn too_few_values() {
        assert!(matches!(
            pit_pvalue(&[0.5; 99], 20),
            Err(Error::TooShort { .. })
        ));
    }
}

//! ARMA mean-model helpers: stationarity-preserving reparameterization,
//! Hannan-Rissanen estimation and BIC order selection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, variance};

/// Maps partial autocorrelations in (-1, 1) to the coefficients `a` of a
/// stationary `y_t = sum a_k y_{t-k}` recursion (Durbin-Levinson).
pub fn pacf_to_coefficients(pacf: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(pacf.len());
    for (k, &r) in pacf.iter().enumerate() {
        let prev = a.clone();
        for j in 0..k {
            a[j] = prev[j] - r * prev[k - 1 - j];
        }
        a.push(r);
    }
    a
}

/// Inverse of [`pacf_to_coefficients`]; `None` if the recursion is not stationary.
pub fn coefficients_to_pacf(coefs: &[f64]) -> Option<Vec<f64>> {
    let p = coefs.len();
    let mut a = coefs.to_vec();
    let mut pacf = vec![0.0; p];
    for k in (0..p).rev() {
        let r = a[k];
        if !(r.abs() < 1.0) {
            return None;
        }
        pacf[k] = r;
        let denom = 1.0 - r * r;
        let prev = a.clone();
        for j in 0..k {
            a[j] = (prev[j] + r * prev[k - 1 - j]) / denom;
        }
        a.truncate(k);
    }
    Some(pacf)
}

pub fn is_stationary(coefs: &[f64]) -> bool {
    coefficients_to_pacf(coefs).is_some()
}

/// Shrinks coefficients towards zero until the recursion is stationary.
pub(crate) fn make_stationary(coefs: &[f64]) -> Vec<f64> {
    let mut c = coefs.to_vec();
    while !is_stationary(&c) {
        c.iter_mut().for_each(|v| *v *= 0.9);
    }
    c
}

/// Ordinary least squares; `rows` are the regressor rows.
pub(crate) fn ols(rows: &[Vec<f64>], target: &[f64]) -> Option<Vec<f64>> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if n < k || k == 0 {
        return None;
    }
    let x = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let y = DVector::from_column_slice(target);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * y;
    let beta = match xtx.clone().cholesky() {
        Some(ch) => ch.solve(&xty),
        None => xtx.svd(true, true).solve(&xty, 1e-12).ok()?,
    };
    let out: Vec<f64> = beta.iter().copied().collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Mean-equation coefficients of an ARMA(p, q) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaCoefficients {
    pub intercept: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
}

impl ArmaCoefficients {
    /// One-step residuals, with pre-sample innovations set to zero and the
    /// recursion starting at index `p`.
    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        let p = self.ar.len();
        let mut eps = vec![0.0; y.len()];
        for t in p..y.len() {
            let mut m = self.intercept;
            for (j, a) in self.ar.iter().enumerate() {
                m += a * y[t - 1 - j];
            }
            for (k, b) in self.ma.iter().enumerate() {
                if t >= p + 1 + k {
                    m += b * eps[t - 1 - k];
                }
            }
            eps[t] = y[t] - m;
        }
        eps
    }
}

fn lag_rows(y: &[f64], resid: Option<&[f64]>, p: usize, q: usize, start: usize) -> Vec<Vec<f64>> {
    (start..y.len())
        .map(|t| {
            let mut row = Vec::with_capacity(1 + p + q);
            row.push(1.0);
            row.extend((1..=p).map(|j| y[t - j]));
            if let Some(e) = resid {
                row.extend((1..=q).map(|k| e[t - k]));
            }
            row
        })
        .collect()
}

/// Long-autoregression order used for the first Hannan-Rissanen stage.
pub(crate) fn long_ar_order(n: usize, max_p: usize, max_q: usize) -> usize {
    (2 * (max_p + max_q)).max(10).min(n / 10).max(1)
}

/// Residuals of a long AR fit; zero before `order`.
pub(crate) fn long_ar_residuals(y: &[f64], order: usize) -> Option<Vec<f64>> {
    let rows = lag_rows(y, None, order, 0, order);
    let beta = ols(&rows, &y[order..])?;
    let mut e = vec![0.0; y.len()];
    for (i, row) in rows.iter().enumerate() {
        let fit: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
        e[order + i] = y[order + i] - fit;
    }
    Some(e)
}

/// Hannan-Rissanen estimate of ARMA(p, q) by regressions over `start..n`.
pub(crate) fn hannan_rissanen(
    y: &[f64],
    long_resid: Option<&[f64]>,
    p: usize,
    q: usize,
    start: usize,
) -> Option<ArmaCoefficients> {
    let rows = lag_rows(y, if q > 0 { long_resid } else { None }, p, q, start);
    let beta = ols(&rows, &y[start..])?;
    let mut ar = beta[1..1 + p].to_vec();
    let mut ma: Vec<f64> = beta[1 + p..].to_vec();
    if !is_stationary(&ar) {
        ar = make_stationary(&ar);
    }
    let neg: Vec<f64> = ma.iter().map(|b| -b).collect();
    if !is_stationary(&neg) {
        ma = make_stationary(&neg).iter().map(|b| -b).collect();
    }
    Some(ArmaCoefficients {
        intercept: beta[0],
        ar,
        ma,
    })
}

/// One candidate of the order search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderCandidate {
    pub p: usize,
    pub q: usize,
    pub log_likelihood: Option<f64>,
    pub bic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub p: usize,
    pub q: usize,
    pub coefficients: ArmaCoefficients,
    pub candidates: Vec<OrderCandidate>,
}

/// `k ln n - 2 ln L`.
pub fn bic(log_likelihood: f64, n_params: usize, n_obs: usize) -> f64 {
    n_params as f64 * (n_obs as f64).ln() - 2.0 * log_likelihood
}

/// Chooses ARMA orders in `[0, max_p] x [0, max_q]` by minimum BIC.
///
/// Every candidate is estimated by Hannan-Rissanen regression and scored by
/// its conditional Gaussian likelihood over a common sample, so BIC values
/// are comparable. Ties go to the smaller `p + q`, then the smaller `p`.
pub fn select_arma_order(series: &[f64], max_p: usize, max_q: usize) -> Result<OrderSelection> {
    let n = series.len();
    let long = long_ar_order(n, max_p, max_q);
    let start = if max_q > 0 {
        long + max_p.max(max_q)
    } else {
        max_p
    };
    if n < start + 10 * (max_p + max_q + 2) {
        return Err(Error::TooShort {
            required: start + 10 * (max_p + max_q + 2),
            actual: n,
        });
    }
    if variance(series) <= 1e-20 * (1.0 + mean(series).powi(2)) {
        return Err(Error::Degenerate("series has no variance".into()));
    }
    let long_resid = if max_q > 0 {
        long_ar_residuals(series, long)
    } else {
        None
    };
    let n_eff = n - start;

    let mut candidates = Vec::new();
    let mut best: Option<(f64, usize, usize, ArmaCoefficients)> = None;
    for p in 0..=max_p {
        for q in 0..=max_q {
            let fitted = if q > 0 && long_resid.is_none() {
                None
            } else {
                hannan_rissanen(series, long_resid.as_deref(), p, q, start)
            };
            let Some(coefs) = fitted else {
                candidates.push(OrderCandidate {
                    p,
                    q,
                    log_likelihood: None,
                    bic: None,
                    error: Some("regression failed".into()),
                });
                continue;
            };
            let eps = coefs.residuals(series);
            let sse: f64 = eps[start..].iter().map(|e| e * e).sum();
            let s2 = sse / n_eff as f64;
            if !(s2 > 0.0 && s2.is_finite()) {
                candidates.push(OrderCandidate {
                    p,
                    q,
                    log_likelihood: None,
                    bic: None,
                    error: Some(format!("residual variance {s2}")),
                });
                continue;
            }
            let ll = -0.5 * n_eff as f64 * ((2.0 * std::f64::consts::PI * s2).ln() + 1.0);
            let b = bic(ll, p + q + 2, n_eff);
            candidates.push(OrderCandidate {
                p,
                q,
                log_likelihood: Some(ll),
                bic: Some(b),
                error: None,
            });
            let better = match &best {
                None => true,
                Some((bb, bp, bq, _)) => {
                    let tol = 1e-9 * bb.abs().max(1.0);
                    b < bb - tol || ((b - bb).abs() <= tol && (p + q, p) < (bp + bq, *bp))
                }
            };
            if better {
                best = Some((b, p, q, coefs));
            }
        }
    }
    match best {
        Some((_, p, q, coefficients)) => Ok(OrderSelection {
            p,
            q,
            coefficients,
            candidates,
        }),
        None => Err(Error::FitFailed(format!(
            "no ARMA candidate could be fitted: {}",
            serde_json::to_string(&candidates).unwrap_or_default()
        ))),
    }
}

//! Seasonal-trend decomposition by Loess, after Cleveland, Cleveland,
//! McRae and Terpenning (1990), plus a sequential multi-period wrapper.

use serde::{Deserialize, Serialize};

use super::loess::tricube;
use crate::error::{invalid, Error, Result};
use crate::stats::lcm;

/// Spans, degrees and iteration counts of one STL pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StlConfig {
    pub period: usize,
    /// Loess span (in cycles) used to smooth each cycle-subseries. Odd, >= 3.
    pub seasonal_span: usize,
    pub trend_span: usize,
    pub low_pass_span: usize,
    pub seasonal_degree: usize,
    pub trend_degree: usize,
    pub low_pass_degree: usize,
    pub seasonal_jump: usize,
    pub trend_jump: usize,
    pub low_pass_jump: usize,
    pub inner_iterations: usize,
    /// Robustness passes; 0 disables the bisquare reweighting.
    pub outer_iterations: usize,
}

fn next_odd(x: usize) -> usize {
    if x % 2 == 0 {
        x + 1
    } else {
        x
    }
}

impl StlConfig {
    /// Defaults: seasonal span is the first odd number above the period,
    /// trend span follows the usual `1.5 p / (1 - 1.5 / ns)` rule, low-pass
    /// span is the first odd number >= the period, jumps are a tenth of
    /// each span, two inner passes and one robustness pass.
    pub fn for_period(period: usize) -> Self {
        Self::with_seasonal_span(period, next_odd(period + 1))
    }

    pub fn with_seasonal_span(period: usize, seasonal_span: usize) -> Self {
        let ns = next_odd(seasonal_span.max(3));
        let trend = (1.5 * period as f64 / (1.0 - 1.5 / ns as f64)).ceil() as usize;
        let trend_span = next_odd(trend.max(3));
        let low_pass_span = next_odd(period.max(3));
        let jump = |span: usize| span.div_ceil(10).max(1);
        Self {
            period,
            seasonal_span: ns,
            trend_span,
            low_pass_span,
            seasonal_degree: 0,
            trend_degree: 1,
            low_pass_degree: 1,
            seasonal_jump: jump(ns),
            trend_jump: jump(trend_span),
            low_pass_jump: jump(low_pass_span),
            inner_iterations: 2,
            outer_iterations: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period < 2 {
            return Err(invalid("STL period must be at least 2"));
        }
        for (name, span) in [
            ("seasonal", self.seasonal_span),
            ("trend", self.trend_span),
            ("low-pass", self.low_pass_span),
        ] {
            if span < 3 || span % 2 == 0 {
                return Err(invalid(format!("{name} span {span} must be odd and >= 3")));
            }
        }
        if [
            self.seasonal_degree,
            self.trend_degree,
            self.low_pass_degree,
        ]
        .iter()
        .any(|&d| d > 1)
        {
            return Err(invalid("STL smoothers support degree 0 or 1"));
        }
        if self.inner_iterations == 0 {
            return Err(invalid("at least one inner iteration is required"));
        }
        if [self.seasonal_jump, self.trend_jump, self.low_pass_jump].contains(&0) {
            return Err(invalid("jumps must be positive"));
        }
        Ok(())
    }
}

/// Additive split `y = seasonal + trend + remainder`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposedSeries {
    pub seasonal: Vec<f64>,
    pub trend: Vec<f64>,
    pub remainder: Vec<f64>,
    pub periods: Vec<usize>,
    /// One seasonal component per period, summing to `seasonal`.
    pub seasonal_components: Vec<Vec<f64>>,
}

impl DecomposedSeries {
    pub fn len(&self) -> usize {
        self.remainder.len()
    }

    pub fn is_empty(&self) -> bool {
        self.remainder.is_empty()
    }

    /// Seasonal plus trend at every step.
    pub fn systematic(&self) -> Vec<f64> {
        self.seasonal
            .iter()
            .zip(&self.trend)
            .map(|(s, t)| s + t)
            .collect()
    }
}

/// Single-period STL decomposition.
pub fn stl(series: &[f64], config: &StlConfig) -> Result<DecomposedSeries> {
    config.validate()?;
    let n = series.len();
    if n < 2 * config.period {
        return Err(Error::TooShort {
            required: 2 * config.period,
            actual: n,
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(invalid("series contains non-finite values"));
    }
    let (seasonal, trend) = Stl::new(series, config).run();
    let remainder = series
        .iter()
        .zip(&seasonal)
        .zip(&trend)
        .map(|((y, s), t)| y - s - t)
        .collect();
    Ok(DecomposedSeries {
        seasonal_components: vec![seasonal.clone()],
        seasonal,
        trend,
        remainder,
        periods: vec![config.period],
    })
}

/// Sequential decomposition for several periods, shortest first: each pass
/// extracts one seasonal component from the series with the previous
/// components removed. The trend comes from the last pass.
pub fn multi_stl(series: &[f64], periods: &[usize]) -> Result<DecomposedSeries> {
    let configs: Vec<StlConfig> = periods.iter().map(|&p| StlConfig::for_period(p)).collect();
    multi_stl_with(series, &configs)
}

pub fn multi_stl_with(series: &[f64], configs: &[StlConfig]) -> Result<DecomposedSeries> {
    if configs.is_empty() {
        return Err(invalid("at least one period is required"));
    }
    let mut configs = configs.to_vec();
    configs.sort_by_key(|c| c.period);
    let longest = configs.last().map(|c| c.period).unwrap_or(0);
    if series.len() < 2 * longest {
        return Err(Error::TooShort {
            required: 2 * longest,
            actual: series.len(),
        });
    }
    let mut deseasonalized = series.to_vec();
    let mut components = Vec::with_capacity(configs.len());
    let mut trend = Vec::new();
    for config in &configs {
        let d = stl(&deseasonalized, config)?;
        for (y, s) in deseasonalized.iter_mut().zip(&d.seasonal) {
            *y -= s;
        }
        components.push(d.seasonal);
        trend = d.trend;
    }
    let mut seasonal = vec![0.0; series.len()];
    for c in &components {
        for (s, v) in seasonal.iter_mut().zip(c) {
            *s += v;
        }
    }
    let remainder = series
        .iter()
        .zip(&seasonal)
        .zip(&trend)
        .map(|((y, s), t)| y - s - t)
        .collect();
    Ok(DecomposedSeries {
        seasonal,
        trend,
        remainder,
        periods: configs.iter().map(|c| c.period).collect(),
        seasonal_components: components,
    })
}

/// Projects seasonal and trend `horizon` steps past the end of the series.
///
/// The seasonal part repeats the last full cycle (the least common multiple
/// of the periods, or each component's own period when that cycle does not
/// fit in the series). The trend is held at its last value.
pub fn project_components(d: &DecomposedSeries, horizon: usize) -> (Vec<f64>, Vec<f64>) {
    let n = d.len();
    let cycle = d.periods.iter().fold(1, |acc, &p| lcm(acc, p));
    let seasonal = if cycle <= n {
        (0..horizon)
            .map(|h| d.seasonal[n - cycle + h % cycle])
            .collect()
    } else {
        (0..horizon)
            .map(|h| {
                d.periods
                    .iter()
                    .zip(&d.seasonal_components)
                    .map(|(&p, c)| c[n - p + h % p])
                    .sum()
            })
            .collect()
    };
    let last = d.trend.last().copied().unwrap_or(0.0);
    (seasonal, vec![last; horizon])
}

struct Stl<'a> {
    y: &'a [f64],
    cfg: &'a StlConfig,
}

impl<'a> Stl<'a> {
    fn new(y: &'a [f64], cfg: &'a StlConfig) -> Self {
        Self { y, cfg }
    }

    fn run(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.y.len();
        let mut season = vec![0.0; n];
        let mut trend = vec![0.0; n];
        let mut rw = vec![1.0; n];
        let mut robust = false;
        let mut pass = 0;
        loop {
            self.inner(&mut season, &mut trend, robust.then_some(rw.as_slice()));
            pass += 1;
            if pass > self.cfg.outer_iterations {
                break;
            }
            robustness_weights(self.y, &season, &trend, &mut rw);
            robust = true;
        }
        (season, trend)
    }

    fn inner(&self, season: &mut [f64], trend: &mut [f64], rw: Option<&[f64]>) {
        let n = self.y.len();
        let np = self.cfg.period;
        let mut detrended = vec![0.0; n];
        for _ in 0..self.cfg.inner_iterations {
            for i in 0..n {
                detrended[i] = self.y[i] - trend[i];
            }
            let cycle = self.cycle_subseries(&detrended, rw);
            let low = moving_average(&moving_average(&moving_average(&cycle, np), np), 3);
            let low = smooth(
                &low,
                self.cfg.low_pass_span,
                self.cfg.low_pass_degree,
                self.cfg.low_pass_jump,
                None,
            );
            for i in 0..n {
                season[i] = cycle[np + i] - low[i];
                detrended[i] = self.y[i] - season[i];
            }
            let t = smooth(
                &detrended,
                self.cfg.trend_span,
                self.cfg.trend_degree,
                self.cfg.trend_jump,
                rw,
            );
            trend.copy_from_slice(&t);
        }
    }

    /// Smooths each cycle-subseries and extends it by one cycle at both ends;
    /// output length is `n + 2 * period`.
    fn cycle_subseries(&self, x: &[f64], rw: Option<&[f64]>) -> Vec<f64> {
        let n = x.len();
        let np = self.cfg.period;
        let ns = self.cfg.seasonal_span;
        let deg = self.cfg.seasonal_degree;
        let mut out = vec![0.0; n + 2 * np];
        let mut sub = Vec::with_capacity(n / np + 1);
        let mut sub_rw = Vec::with_capacity(n / np + 1);
        for j in 0..np {
            sub.clear();
            sub_rw.clear();
            sub.extend((j..n).step_by(np).map(|i| x[i]));
            if let Some(rw) = rw {
                sub_rw.extend((j..n).step_by(np).map(|i| rw[i]));
            }
            let k = sub.len();
            let srw = rw.map(|_| sub_rw.as_slice());
            let fitted = smooth(&sub, ns, deg, self.cfg.seasonal_jump, srw);
            let right = ns.min(k) - 1;
            let first = estimate(&sub, ns, deg, -1.0, 0, right, srw).unwrap_or(fitted[0]);
            let left = k.saturating_sub(ns);
            let last = estimate(&sub, ns, deg, k as f64, left, k - 1, srw).unwrap_or(fitted[k - 1]);
            out[j] = first;
            for (m, v) in fitted.iter().enumerate() {
                out[(m + 1) * np + j] = *v;
            }
            out[(k + 1) * np + j] = last;
        }
        out
    }
}

/// Bisquare weights from the remainder, scaled by six median absolute residuals.
fn robustness_weights(y: &[f64], season: &[f64], trend: &[f64], rw: &mut [f64]) {
    let resid: Vec<f64> = y
        .iter()
        .zip(season)
        .zip(trend)
        .map(|((y, s), t)| (y - s - t).abs())
        .collect();
    let mut sorted = resid.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let cmad = 3.0 * (sorted[(n - 1) / 2] + sorted[n / 2]);
    let (c9, c1) = (0.999 * cmad, 0.001 * cmad);
    for (w, r) in rw.iter_mut().zip(resid) {
        *w = if r <= c1 {
            1.0
        } else if r <= c9 {
            let u = r / cmad;
            (1.0 - u * u).powi(2)
        } else {
            0.0
        };
    }
}

fn moving_average(x: &[f64], len: usize) -> Vec<f64> {
    let n = x.len();
    let out_len = n + 1 - len;
    let mut out = Vec::with_capacity(out_len);
    let mut sum: f64 = x[..len].iter().sum();
    let inv = 1.0 / len as f64;
    out.push(sum * inv);
    for i in len..n {
        sum += x[i] - x[i - len];
        out.push(sum * inv);
    }
    out
}

/// Loess estimate at position `xs` (in index units) from points
/// `left..=right`, with the classic STL bandwidth rule for spans longer than
/// the series.
fn estimate(
    y: &[f64],
    span: usize,
    degree: usize,
    xs: f64,
    left: usize,
    right: usize,
    rw: Option<&[f64]>,
) -> Option<f64> {
    let n = y.len();
    let range = n as f64 - 1.0;
    let mut h = (xs - left as f64).max(right as f64 - xs);
    if span > n {
        h += ((span - n) / 2) as f64;
    }
    let h9 = 0.999 * h;
    let h1 = 0.001 * h;
    let mut total = 0.0;
    let mut sw = 0.0;
    let mut swx = 0.0;
    let mut swy = 0.0;
    let mut swxx = 0.0;
    let mut swxy = 0.0;
    for j in left..=right {
        let r = (j as f64 - xs).abs();
        let mut w = if r <= h1 {
            1.0
        } else if r <= h9 {
            tricube(r / h)
        } else {
            0.0
        };
        if let Some(rw) = rw {
            w *= rw[j];
        }
        if w > 0.0 {
            let x = j as f64;
            total += w;
            sw += w;
            swx += w * x;
            swy += w * y[j];
            swxx += w * x * x;
            swxy += w * x * y[j];
        }
    }
    if total <= 0.0 {
        return None;
    }
    let mean_x = swx / sw;
    let mean_y = swy / sw;
    if h > 0.0 && degree > 0 {
        let c = swxx / sw - mean_x * mean_x;
        if c.sqrt() > 0.001 * range {
            let slope = (swxy / sw - mean_x * mean_y) / c;
            return Some(mean_y + slope * (xs - mean_x));
        }
    }
    Some(mean_y)
}

/// Loess smoothing of an equally spaced series, fitting every `jump`-th
/// point and interpolating linearly in between.
fn smooth(y: &[f64], span: usize, degree: usize, jump: usize, rw: Option<&[f64]>) -> Vec<f64> {
    let n = y.len();
    if n < 2 {
        return y.to_vec();
    }
    let mut out = vec![0.0; n];
    let jump = jump.min(n - 1).max(1);
    let half = span.div_ceil(2);
    let window = |i: usize| -> (usize, usize) {
        if span >= n {
            (0, n - 1)
        } else if i < half {
            (0, span - 1)
        } else if i >= n - half {
            (n - span, n - 1)
        } else {
            (i + 1 - half, i + span - half)
        }
    };
    let mut i = 0;
    while i < n {
        let (l, r) = window(i);
        out[i] = estimate(y, span, degree, i as f64, l, r, rw).unwrap_or(y[i]);
        i += jump;
    }
    if jump > 1 {
        let mut i = 0;
        while i + jump < n {
            let delta = (out[i + jump] - out[i]) / jump as f64;
            for k in 1..jump {
                out[i + k] = out[i] + delta * k as f64;
            }
            i += jump;
        }
        let last_fit = ((n - 1) / jump) * jump;
        if last_fit != n - 1 {
            let (l, r) = window(n - 1);
            out[n - 1] = estimate(y, span, degree, (n - 1) as f64, l, r, rw).unwrap_or(y[n - 1]);
            let delta = (out[n - 1] - out[last_fit]) / (n - 1 - last_fit) as f64;
            for k in last_fit + 1..n - 1 {
                out[k] = out[last_fit] + delta * (k - last_fit) as f64;
            }
        }
    }
    out
}

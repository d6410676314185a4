//! ARMA(p, q)-GARCH(r, s) with skew-GED innovations:
//!
//! ```text
//! y_t       = intercept + sum_j ar_j y_{t-j} + sum_k ma_k e_{t-k} + e_t
//! sigma2_t  = omega + sum_l garch_l sigma2_{t-l} + sum_m arch_m e_{t-m}^2
//! e_t       = sigma_t z_t,   z_t ~ SGED(0, 1, shape, skew)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::arma::{
    coefficients_to_pacf, hannan_rissanen, is_stationary, long_ar_order, long_ar_residuals,
    make_stationary, pacf_to_coefficients, ArmaCoefficients,
};
use super::density::DensityForecast;
use super::optimize::{nelder_mead, NelderMeadOptions};
use super::sged::{Sged, SgedParams};
use crate::error::{invalid, Error, Result};
use crate::rng::derive_rng;
use crate::stats::{mean, std_dev};

const SHAPE_MIN: f64 = 0.5;
const SHAPE_MAX: f64 = 20.0;
const LN_SKEW_MAX: f64 = 1.5;

/// Model coefficients; see the module docs for the equations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaGarchParams {
    pub intercept: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub omega: f64,
    pub garch: Vec<f64>,
    pub arch: Vec<f64>,
    pub shape: f64,
    pub skew: f64,
}

impl ArmaGarchParams {
    /// Sum of the GARCH and ARCH coefficients.
    pub fn persistence(&self) -> f64 {
        self.garch.iter().sum::<f64>() + self.arch.iter().sum::<f64>()
    }

    /// Positivity and covariance-stationarity of the variance recursion.
    pub fn validate(&self) -> Result<()> {
        let all = [self.intercept, self.omega, self.shape, self.skew]
            .into_iter()
            .chain(self.ar.iter().copied())
            .chain(self.ma.iter().copied())
            .chain(self.garch.iter().copied())
            .chain(self.arch.iter().copied());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite model coefficient"));
        }
        if self.omega <= 0.0 {
            return Err(invalid(format!(
                "variance constant {} must be positive",
                self.omega
            )));
        }
        if self.garch.iter().chain(&self.arch).any(|&c| c < 0.0) {
            return Err(invalid("variance coefficients must be non-negative"));
        }
        if self.persistence() >= 1.0 {
            return Err(invalid(format!(
                "variance persistence {} not below 1",
                self.persistence()
            )));
        }
        Sged::new(SgedParams::standard(self.shape, self.skew)).map(|_| ())
    }

    pub fn innovation(&self) -> Result<Sged> {
        Sged::new(SgedParams::standard(self.shape, self.skew))
    }

    fn conditional_mean(&self, y_lags: &[f64], e_lags: &[f64]) -> f64 {
        // lags are stored oldest first
        let mut m = self.intercept;
        for (a, y) in self.ar.iter().zip(y_lags.iter().rev()) {
            m += a * y;
        }
        for (b, e) in self.ma.iter().zip(e_lags.iter().rev()) {
            m += b * e;
        }
        m
    }

    fn conditional_variance(&self, s2_lags: &[f64], e_lags: &[f64]) -> f64 {
        let mut v = self.omega;
        for (g, s) in self.garch.iter().zip(s2_lags.iter().rev()) {
            v += g * s;
        }
        for (a, e) in self.arch.iter().zip(e_lags.iter().rev()) {
            v += a * e * e;
        }
        v
    }

    /// Runs both recursions over `y` from index `p`, with zero pre-sample
    /// innovations and pre-sample variances (and squared innovations) equal to
    /// the mean squared residual. Returns `(residuals, variances)`; entries
    /// before `p` are zero.
    fn filter(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut eps = vec![0.0; y.len()];
        let mut s2 = vec![0.0; y.len()];
        filter_into(self, y, &mut eps, &mut s2);
        (eps, s2)
    }
}

/// Filter recursion writing into caller-owned buffers; returns the
/// pre-sample variance used.
fn filter_into(p: &ArmaGarchParams, y: &[f64], eps: &mut [f64], s2: &mut [f64]) -> f64 {
    let n = y.len();
    let t0 = p.ar.len();
    eps[..t0.min(n)].iter_mut().for_each(|e| *e = 0.0);
    for t in t0..n {
        let mut m = p.intercept;
        for (j, a) in p.ar.iter().enumerate() {
            m += a * y[t - 1 - j];
        }
        for (k, b) in p.ma.iter().enumerate() {
            if t >= t0 + 1 + k {
                m += b * eps[t - 1 - k];
            }
        }
        eps[t] = y[t] - m;
    }
    let v0 = if n > t0 {
        eps[t0..].iter().map(|e| e * e).sum::<f64>() / (n - t0) as f64
    } else {
        1.0
    };
    for t in t0..n {
        let mut v = p.omega;
        for (l, g) in p.garch.iter().enumerate() {
            v += g * if t >= t0 + 1 + l { s2[t - 1 - l] } else { v0 };
        }
        for (m, a) in p.arch.iter().enumerate() {
            v += a * if t >= t0 + 1 + m {
                eps[t - 1 - m].powi(2)
            } else {
                v0
            };
        }
        s2[t] = v;
    }
    v0
}

fn log_likelihood_of(p: &ArmaGarchParams, sged: &Sged, eps: &[f64], s2: &[f64]) -> f64 {
    let t0 = p.ar.len();
    let mut ll = 0.0;
    for t in t0..eps.len() {
        let v = s2[t];
        if !(v > 0.0) || !v.is_finite() {
            return f64::NEG_INFINITY;
        }
        let sd = v.sqrt();
        ll += sged.ln_density_standard(eps[t] / sd) - sd.ln();
    }
    ll
}

/// Recursion state after the last observation: the most recent values
/// (oldest first) needed to continue the recursions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub y: Vec<f64>,
    pub eps: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl FilterState {
    fn from_filtered(
        params: &ArmaGarchParams,
        y: &[f64],
        eps: &[f64],
        s2: &[f64],
        v0: f64,
    ) -> Self {
        let n = y.len();
        let tail = |xs: &[f64], k: usize, pad: f64| -> Vec<f64> {
            let take = k.min(n);
            let mut v = vec![pad; k - take];
            v.extend_from_slice(&xs[n - take..]);
            v
        };
        let e_len = params.ma.len().max(params.arch.len());
        let mut eps_tail = tail(eps, e_len, 0.0);
        let mut s2_tail = tail(s2, params.garch.len(), v0);
        // positions before the recursion start hold placeholders; use the pre-sample values
        let t0 = params.ar.len();
        for (i, e) in eps_tail.iter_mut().enumerate() {
            let t = n as isize - e_len as isize + i as isize;
            if t < t0 as isize {
                *e = 0.0;
            }
        }
        for (i, s) in s2_tail.iter_mut().enumerate() {
            let t = n as isize - params.garch.len() as isize + i as isize;
            if t < t0 as isize {
                *s = v0;
            }
        }
        Self {
            y: tail(y, params.ar.len(), mean(y)),
            eps: eps_tail,
            sigma2: s2_tail,
        }
    }

    fn push(buf: &mut [f64], v: f64) {
        if !buf.is_empty() {
            buf.rotate_left(1);
            *buf.last_mut().unwrap() = v;
        }
    }

    fn step(&mut self, params: &ArmaGarchParams, y: f64) {
        let m = params.conditional_mean(&self.y, &self.eps);
        let v = params.conditional_variance(&self.sigma2, &self.eps);
        Self::push(&mut self.y, y);
        Self::push(&mut self.eps, y - m);
        Self::push(&mut self.sigma2, v);
    }
}

/// Optimizer bookkeeping kept with a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub initial_log_likelihood: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaGarchModel {
    pub params: ArmaGarchParams,
    pub log_likelihood: f64,
    pub bic: f64,
    pub n_obs: usize,
    pub trace: Option<FitTrace>,
    pub state: FilterState,
}

impl ArmaGarchModel {
    /// A model with given coefficients, conditioned on `history`.
    pub fn from_params(params: ArmaGarchParams, history: &[f64]) -> Result<Self> {
        params.validate()?;
        if history.len() <= params.ar.len() {
            return Err(Error::TooShort {
                required: params.ar.len() + 1,
                actual: history.len(),
            });
        }
        let sged = params.innovation()?;
        let mut eps = vec![0.0; history.len()];
        let mut s2 = vec![0.0; history.len()];
        let v0 = filter_into(&params, history, &mut eps, &mut s2);
        let ll = log_likelihood_of(&params, &sged, &eps, &s2);
        let n_obs = history.len() - params.ar.len();
        let state = FilterState::from_filtered(&params, history, &eps, &s2, v0);
        Ok(Self {
            bic: super::arma::bic(ll, n_params(&params), n_obs),
            log_likelihood: ll,
            n_obs,
            trace: None,
            state,
            params,
        })
    }

    pub fn p(&self) -> usize {
        self.params.ar.len()
    }

    pub fn q(&self) -> usize {
        self.params.ma.len()
    }

    /// Conditions the model on further observations that follow its history.
    pub fn advance(&self, observations: &[f64]) -> Self {
        let mut next = self.clone();
        for &y in observations {
            next.state.step(&self.params, y);
        }
        next
    }

    /// `e_t / sigma_t` over `series`, from index `p` on.
    pub fn standardized_residuals(&self, series: &[f64]) -> Vec<f64> {
        let (eps, s2) = self.params.filter(series);
        (self.p()..series.len())
            .map(|t| eps[t] / s2[t].sqrt())
            .collect()
    }

    /// Simulates `paths` continuations of length `horizon`; element `[h][m]` is
    /// path `m` at lead `h + 1`.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        horizon: usize,
        paths: usize,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        let sged = self.params.innovation()?;
        let mut out = vec![Vec::with_capacity(paths); horizon];
        let mut st = self.state.clone();
        for _ in 0..paths {
            st.clone_from(&self.state);
            for lead in out.iter_mut() {
                let m = self.params.conditional_mean(&st.y, &st.eps);
                let v = self.params.conditional_variance(&st.sigma2, &st.eps);
                let e = v.sqrt() * sged.sample_standard(rng);
                let y = m + e;
                FilterState::push(&mut st.y, y);
                FilterState::push(&mut st.eps, e);
                FilterState::push(&mut st.sigma2, v);
                lead.push(y);
            }
        }
        Ok(out)
    }
}

fn n_params(p: &ArmaGarchParams) -> usize {
    1 + p.ar.len() + p.ma.len() + 1 + p.garch.len() + p.arch.len() + 2
}

/// Monte-Carlo density forecasts for leads `1..=horizon` from `paths`
/// simulated continuations.
pub fn forecast_density(
    model: &ArmaGarchModel,
    horizon: usize,
    paths: usize,
    seed: u64,
) -> Result<Vec<DensityForecast>> {
    if horizon < 1 {
        return Err(invalid("forecast horizon must be at least 1"));
    }
    if paths < 1 {
        return Err(invalid("at least one simulated path is required"));
    }
    let mut rng = derive_rng(seed, &[]);
    model
        .simulate(horizon, paths, &mut rng)?
        .into_iter()
        .enumerate()
        .map(|(h, ens)| DensityForecast::new(h + 1, ens))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    pub garch_order: usize,
    pub arch_order: usize,
    pub max_iterations: usize,
    /// Restarts from a perturbed optimum when the first search does not converge.
    pub restarts: usize,
    /// Starting mean coefficients; estimated by regression when absent.
    #[serde(skip)]
    pub initial_mean: Option<ArmaCoefficients>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            garch_order: 1,
            arch_order: 1,
            max_iterations: 500,
            restarts: 1,
            initial_mean: None,
        }
    }
}

/// Unconstrained coordinates <-> constrained coefficients.
struct Layout {
    p: usize,
    q: usize,
    r: usize,
    s: usize,
}

impl Layout {
    fn dim(&self) -> usize {
        1 + self.p + self.q + 1 + self.r + self.s + 2
    }

    fn decode(&self, u: &[f64]) -> ArmaGarchParams {
        let mut i = 0;
        let mut take = |k: usize| {
            let s = &u[i..i + k];
            i += k;
            s
        };
        let intercept = take(1)[0];
        let ar_raw: Vec<f64> = take(self.p).iter().map(|v| v.tanh()).collect();
        let ma_raw: Vec<f64> = take(self.q).iter().map(|v| v.tanh()).collect();
        let omega = take(1)[0].exp();
        let logits = take(self.r + self.s);
        let exps: Vec<f64> = logits.iter().map(|v| v.clamp(-50.0, 50.0).exp()).collect();
        let denom = 1.0 + exps.iter().sum::<f64>();
        let shape_raw = take(1)[0];
        let skew_raw = take(1)[0];
        ArmaGarchParams {
            intercept,
            ar: pacf_to_coefficients(&ar_raw),
            ma: pacf_to_coefficients(&ma_raw).iter().map(|c| -c).collect(),
            omega,
            garch: exps[..self.r].iter().map(|e| e / denom).collect(),
            arch: exps[self.r..].iter().map(|e| e / denom).collect(),
            shape: SHAPE_MIN + (SHAPE_MAX - SHAPE_MIN) / (1.0 + (-shape_raw).exp()),
            skew: (LN_SKEW_MAX * skew_raw.tanh()).exp(),
        }
    }

    fn encode(&self, p: &ArmaGarchParams) -> Vec<f64> {
        let atanh = |x: f64| x.clamp(-0.999, 0.999).atanh();
        let mut u = vec![p.intercept];
        let ar = make_stationary(&p.ar);
        u.extend(
            coefficients_to_pacf(&ar)
                .unwrap_or_default()
                .into_iter()
                .map(atanh),
        );
        let neg_ma: Vec<f64> = make_stationary(&p.ma.iter().map(|b| -b).collect::<Vec<_>>());
        u.extend(
            coefficients_to_pacf(&neg_ma)
                .unwrap_or_default()
                .into_iter()
                .map(atanh),
        );
        u.push(p.omega.ln());
        let rest = (1.0 - p.persistence()).max(1e-6);
        u.extend(
            p.garch
                .iter()
                .chain(&p.arch)
                .map(|c| (c.max(1e-6) / rest).ln()),
        );
        let frac = ((p.shape - SHAPE_MIN) / (SHAPE_MAX - SHAPE_MIN)).clamp(1e-6, 1.0 - 1e-6);
        u.push((frac / (1.0 - frac)).ln());
        u.push(atanh(p.skew.ln() / LN_SKEW_MAX));
        u
    }
}

/// Maximum-likelihood fit of ARMA(p, q)-GARCH(1, 1) with SGED innovations.
pub fn fit_arma_garch(series: &[f64], p: usize, q: usize) -> Result<ArmaGarchModel> {
    fit_arma_garch_with(series, p, q, &FitOptions::default())
}

/// Maximum-likelihood fit by Nelder-Mead over transformed coordinates that
/// keep the AR part stationary, the MA part invertible, the variance
/// constant positive and the variance persistence below one.
///
/// The series is standardized internally; coefficients and likelihood are
/// reported in the original units.
pub fn fit_arma_garch_with(
    series: &[f64],
    p: usize,
    q: usize,
    opts: &FitOptions,
) -> Result<ArmaGarchModel> {
    let (r, s) = (opts.garch_order, opts.arch_order);
    let n = series.len();
    let required = 10 * (p + q + r + s + 2);
    if n < required {
        return Err(Error::TooShort {
            required,
            actual: n,
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(invalid("series contains non-finite values"));
    }
    let loc = mean(series);
    let scale = std_dev(series);
    if !(scale > 1e-10 * loc.abs().max(1.0)) {
        return Err(Error::Degenerate(format!(
            "series has standard deviation {scale}"
        )));
    }
    let z: Vec<f64> = series.iter().map(|v| (v - loc) / scale).collect();

    let mean_init = match &opts.initial_mean {
        Some(c) if c.ar.len() == p && c.ma.len() == q => ArmaCoefficients {
            intercept: (c.intercept - loc * (1.0 - c.ar.iter().sum::<f64>())) / scale,
            ar: c.ar.clone(),
            ma: c.ma.clone(),
        },
        _ => initial_mean(&z, p, q),
    };
    let resid = mean_init.residuals(&z);
    let v = (resid[p..].iter().map(|e| e * e).sum::<f64>() / (n - p) as f64).max(1e-6);
    let init = ArmaGarchParams {
        intercept: mean_init.intercept,
        ar: mean_init.ar.clone(),
        ma: mean_init.ma.clone(),
        omega: 0.05 * v,
        garch: vec![0.85 / r.max(1) as f64; r],
        arch: vec![0.10 / s.max(1) as f64; s],
        shape: 2.0,
        skew: 1.0,
    };
    let layout = Layout { p, q, r, s };
    let u0 = layout.encode(&init);

    let mut eps = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    let mut neg_ll = |u: &[f64]| -> f64 {
        let prm = layout.decode(u);
        let Ok(sged) = prm.innovation() else {
            return f64::INFINITY;
        };
        filter_into(&prm, &z, &mut eps, &mut s2);
        -log_likelihood_of(&prm, &sged, &eps, &s2)
    };
    let initial = neg_ll(&u0);
    let steps: Vec<f64> = (0..layout.dim())
        .map(|i| match i {
            0 => 0.1,
            i if i <= p + q => 0.2,
            _ => 0.5,
        })
        .collect();
    let nm_opts = NelderMeadOptions {
        max_iterations: opts.max_iterations,
        f_tol: 1e-6 * (n as f64).sqrt(),
        x_tol: 1e-3,
    };
    let mut best = nelder_mead(&mut neg_ll, &u0, &steps, &nm_opts);
    let (mut iterations, mut evaluations) = (best.iterations, best.evaluations);
    let mut restarts = 0;
    let mut converged = best.converged;
    while !converged && restarts < opts.restarts {
        restarts += 1;
        let perturbed: Vec<f64> = best
            .x
            .iter()
            .enumerate()
            .map(|(i, x)| x + if i % 2 == 0 { 0.05 } else { -0.05 })
            .collect();
        let small: Vec<f64> = steps.iter().map(|s| s * 0.25).collect();
        let again = nelder_mead(&mut neg_ll, &perturbed, &small, &nm_opts);
        iterations += again.iterations;
        evaluations += again.evaluations;
        // a restart that cannot improve materially confirms the optimum
        let settled = again.value >= best.value - nm_opts.f_tol;
        converged = again.converged || settled;
        if again.value < best.value {
            best = again;
        }
    }
    if !best.value.is_finite() {
        return Err(Error::FitFailed(format!(
            "ARMA({p},{q})-GARCH likelihood not finite after {evaluations} evaluations"
        )));
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "ARMA({p},{q})-GARCH: {iterations} iterations, {evaluations} evaluations, {restarts} restarts, \
             initial -logL {initial:.6}, best -logL {:.6}",
            best.value
        )));
    }

    let std_params = layout.decode(&best.x);
    let params = ArmaGarchParams {
        intercept: std_params.intercept * scale + loc * (1.0 - std_params.ar.iter().sum::<f64>()),
        omega: std_params.omega * scale * scale,
        ..std_params
    };
    params
        .validate()
        .map_err(|e| Error::FitFailed(format!("optimum violates model constraints: {e}")))?;
    let mut model = ArmaGarchModel::from_params(params, series)?;
    model.trace = Some(FitTrace {
        initial_log_likelihood: -initial - (n - p) as f64 * scale.ln(),
        iterations,
        evaluations,
        restarts,
    });
    Ok(model)
}

fn initial_mean(z: &[f64], p: usize, q: usize) -> ArmaCoefficients {
    let fallback = ArmaCoefficients {
        intercept: 0.0,
        ar: vec![0.0; p],
        ma: vec![0.0; q],
    };
    if p + q == 0 {
        return ArmaCoefficients {
            intercept: mean(z),
            ..fallback
        };
    }
    let long = long_ar_order(z.len(), p, q);
    let (resid, start) = if q > 0 {
        (long_ar_residuals(z, long), long + p.max(q))
    } else {
        (None, p)
    };
    if q > 0 && resid.is_none() {
        return fallback;
    }
    match hannan_rissanen(z, resid.as_deref(), p, q, start) {
        Some(c) if is_stationary(&c.ar) => c,
        _ => fallback,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::std_dev;

    pub(crate) fn simulate_garch(
        omega: f64,
        garch: f64,
        arch: f64,
        n: usize,
        seed: u64,
    ) -> Vec<f64> {
        let params = ArmaGarchParams {
            intercept: 0.0,
            ar: vec![],
            ma: vec![],
            omega,
            garch: vec![garch],
            arch: vec![arch],
            shape: 2.0,
            skew: 1.0,
        };
        let model = ArmaGarchModel::from_params(params, &[0.0, 0.0]).unwrap();
        let mut rng = derive_rng(seed, &[]);
        let sim = model.simulate(n + 500, 1, &mut rng).unwrap();
        sim.into_iter().skip(500).map(|v| v[0]).collect()
    }

    #[test]
    fn transform_round_trip() {
        let layout = Layout {
            p: 2,
            q: 1,
            r: 1,
            s: 1,
        };
        let prm = ArmaGarchParams {
            intercept: 0.3,
            ar: vec![0.5, -0.2],
            ma: vec![0.4],
            omega: 0.02,
            garch: vec![0.8],
            arch: vec![0.1],
            shape: 1.4,
            skew: 1.3,
        };
        let back = layout.decode(&layout.encode(&prm));
        for (a, b) in [
            (prm.intercept, back.intercept),
            (prm.ar[0], back.ar[0]),
            (prm.ar[1], back.ar[1]),
            (prm.ma[0], back.ma[0]),
            (prm.omega, back.omega),
            (prm.garch[0], back.garch[0]),
            (prm.arch[0], back.arch[0]),
            (prm.shape, back.shape),
            (prm.skew, back.skew),
        ] {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn recovers_garch_parameters() {
        let y = simulate_garch(0.05, 0.90, 0.05, 5000, 1);
        let m = fit_arma_garch(&y, 0, 0).unwrap();
        assert!((m.params.omega - 0.05).abs() < 0.05, "{:?}", m.params);
        assert!((m.params.garch[0] - 0.90).abs() < 0.05, "{:?}", m.params);
        assert!((m.params.arch[0] - 0.05).abs() < 0.05, "{:?}", m.params);
        let trace = m.trace.as_ref().unwrap();
        assert!(m.log_likelihood >= trace.initial_log_likelihood);
    }

    #[test]
    fn constant_series_is_rejected() {
        assert!(matches!(
            fit_arma_garch(&[1.5; 500], 1, 0),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            fit_arma_garch(&[1.5; 20], 1, 0),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn iid_reduction() {
        let params = ArmaGarchParams {
            intercept: 1.0,
            ar: vec![],
            ma: vec![],
            omega: 0.25,
            garch: vec![0.0],
            arch: vec![0.0],
            shape: 2.0,
            skew: 1.0,
        };
        let model = ArmaGarchModel::from_params(params, &[1.0, 2.0, 0.5]).unwrap();
        let fc = forecast_density(&model, 12, 4000, 9).unwrap();
        for f in &fc {
            let sd = std_dev(&f.ensemble);
            // se of a sample sd is about sd / sqrt(2M)
            assert!(
                (sd - 0.5).abs() < 3.0 * 0.5 / (8000f64).sqrt() + 1e-3,
                "{sd}"
            );
        }
    }

    #[test]
    fn ar1_one_step_mean() {
        let params = ArmaGarchParams {
            intercept: 0.5,
            ar: vec![0.7],
            ma: vec![],
            omega: 0.04,
            garch: vec![0.0],
            arch: vec![0.0],
            shape: 2.0,
            skew: 1.0,
        };
        let model = ArmaGarchModel::from_params(params, &[0.0, 1.0, 2.0]).unwrap();
        let fc = forecast_density(&model, 1, 5000, 4).unwrap();
        let m = mean(&fc[0].ensemble);
        assert!((m - (0.5 + 0.7 * 2.0)).abs() < 3.0 * 0.2 / (5000f64).sqrt());
    }

    #[test]
    fn spread_grows_with_lead() {
        let y = simulate_garch(0.05, 0.85, 0.1, 3000, 5);
        let ar: Vec<f64> = {
            let mut v = vec![0.0; y.len()];
            for t in 1..y.len() {
                v[t] = 0.6 * v[t - 1] + y[t];
            }
            v
        };
        let m = fit_arma_garch(&ar, 1, 0).unwrap();
        let fc = forecast_density(&m, 24, 4000, 2).unwrap();
        let sds: Vec<f64> = fc.iter().map(|f| std_dev(&f.ensemble)).collect();
        assert!(sds[23] > sds[0]);
        assert!(
            sds.windows(2).filter(|w| w[1] < w[0] * 0.97).count() == 0,
            "{sds:?}"
        );
    }

    #[test]
    fn forecasts_are_reproducible() {
        let y = simulate_garch(0.05, 0.85, 0.1, 1000, 6);
        let m = fit_arma_garch(&y, 1, 1).unwrap();
        let a = forecast_density(&m, 5, 100, 3).unwrap();
        let b = forecast_density(&m, 5, 100, 3).unwrap();
        assert_eq!(a, b);
        assert!(forecast_density(&m, 0, 100, 3).is_err());
    }

    #[test]
    fn advance_matches_refiltering() {
        let y = simulate_garch(0.05, 0.85, 0.1, 800, 7);
        let m = fit_arma_garch(&y[..600], 1, 1).unwrap();
        let stepped = m.advance(&y[600..]);
        let direct = ArmaGarchModel::from_params(m.params.clone(), &y).unwrap();
        for (a, b) in stepped.state.sigma2.iter().zip(&direct.state.sigma2) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
        for (a, b) in stepped.state.eps.iter().zip(&direct.state.eps) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

use chrono::{DateTime, TimeZone, Utc};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{RawPanel, HOURS_PER_WEEK};
use crate::error::{invalid, Result};
use crate::rng::derive_rng;

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

impl ParamRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        // always consume one draw so streams stay aligned across configs
        let u: f64 = rng.random();
        self.lo + u * (self.hi - self.lo)
    }

    fn sample_log<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if self.lo > 0.0 {
            (self.lo.ln() + u * (self.hi.ln() - self.lo.ln())).exp()
        } else {
            self.lo + u * (self.hi - self.lo)
        }
    }
}

impl From<[f64; 2]> for ParamRange {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<ParamRange> for [f64; 2] {
    fn from(r: ParamRange) -> Self {
        [r.lo, r.hi]
    }
}

/// Parameters of the synthetic household population.
///
/// Amplitudes, slope and noise are relative to each household's base load.
/// The noise is an AR(1) process driven by GARCH(1,1) innovations whose
/// stationary standard deviation is `noise_scale * base_load`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticPopulationConfig {
    pub n_households: usize,
    pub n_hours: usize,
    pub seed: u64,
    pub start: DateTime<Utc>,
    pub base_load: ParamRange,
    pub daily_amplitude: ParamRange,
    pub weekly_amplitude: ParamRange,
    pub trend_slope: ParamRange,
    /// Sampled log-uniformly when both ends are positive.
    pub noise_scale: ParamRange,
    pub garch_alpha: ParamRange,
    pub garch_beta: ParamRange,
    pub ar_coefficient: ParamRange,
    pub missing_rate: f64,
}

impl Default for SyntheticPopulationConfig {
    fn default() -> Self {
        Self {
            n_households: 200,
            n_hours: 26 * HOURS_PER_WEEK,
            seed: 42,
            start: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
            base_load: ParamRange::new(0.2, 1.5),
            daily_amplitude: ParamRange::new(0.1, 0.6),
            weekly_amplitude: ParamRange::new(0.0, 0.25),
            trend_slope: ParamRange::new(-2e-5, 2e-5),
            noise_scale: ParamRange::new(0.04, 0.6),
            garch_alpha: ParamRange::new(0.03, 0.12),
            garch_beta: ParamRange::new(0.75, 0.85),
            ar_coefficient: ParamRange::new(0.0, 0.6),
            missing_rate: 0.0,
        }
    }
}

impl SyntheticPopulationConfig {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("base_load", self.base_load),
            ("daily_amplitude", self.daily_amplitude),
            ("weekly_amplitude", self.weekly_amplitude),
            ("trend_slope", self.trend_slope),
            ("noise_scale", self.noise_scale),
            ("garch_alpha", self.garch_alpha),
            ("garch_beta", self.garch_beta),
            ("ar_coefficient", self.ar_coefficient),
        ];
        for (name, r) in ranges {
            if !r.is_valid() {
                return Err(invalid(format!(
                    "{name}: [{}, {}] is not a valid interval",
                    r.lo, r.hi
                )));
            }
        }
        if self.n_households == 0 || self.n_hours == 0 {
            return Err(invalid("n_households and n_hours must be positive"));
        }
        if !(0.0..=1.0).contains(&self.missing_rate) {
            return Err(invalid(format!(
                "missing_rate {} outside [0, 1]",
                self.missing_rate
            )));
        }
        if self.base_load.lo < 0.0 || self.noise_scale.lo < 0.0 {
            return Err(invalid("base_load and noise_scale must be non-negative"));
        }
        if self.garch_alpha.lo < 0.0
            || self.garch_beta.lo < 0.0
            || self.garch_alpha.hi + self.garch_beta.hi >= 1.0
        {
            return Err(invalid(
                "GARCH alpha/beta must be non-negative with alpha + beta < 1",
            ));
        }
        if self.ar_coefficient.lo <= -1.0 || self.ar_coefficient.hi >= 1.0 {
            return Err(invalid("ar_coefficient must lie in (-1, 1)"));
        }
        Ok(())
    }
}

struct Household {
    base: f64,
    daily_amp: f64,
    daily_phase: f64,
    second_harmonic: f64,
    weekly_amp: f64,
    weekly_phase: f64,
    slope: f64,
    noise_sd: f64,
    alpha: f64,
    beta: f64,
    ar: f64,
}

const BURN_IN: usize = 200;

/// Generates a heterogeneous population of hourly demand series.
///
/// Each household draws its parameters and noise from its own stream derived
/// from `(seed, household index)`, so the result does not depend on N for the
/// households both panels share.
pub fn synthesize_population(config: &SyntheticPopulationConfig) -> Result<RawPanel> {
    config.validate()?;
    let columns: Vec<Vec<Option<f64>>> = (0..config.n_households)
        .map(|i| household_series(config, i as u64))
        .collect();
    let ids = (0..config.n_households)
        .map(|i| format!("H{i:04}"))
        .collect();
    RawPanel::new(config.start, ids, columns)
}

fn household_series(config: &SyntheticPopulationConfig, index: u64) -> Vec<Option<f64>> {
    let mut prng = derive_rng(config.seed, &[index, 0]);
    let h = Household {
        base: config.base_load.sample(&mut prng),
        daily_amp: config.daily_amplitude.sample(&mut prng),
        daily_phase: prng.random::<f64>() * 24.0,
        second_harmonic: prng.random::<f64>() * 0.5,
        weekly_amp: config.weekly_amplitude.sample(&mut prng),
        weekly_phase: prng.random::<f64>() * HOURS_PER_WEEK as f64,
        slope: config.trend_slope.sample(&mut prng),
        noise_sd: config.noise_scale.sample_log(&mut prng),
        alpha: config.garch_alpha.sample(&mut prng),
        beta: config.garch_beta.sample(&mut prng),
        ar: config.ar_coefficient.sample(&mut prng),
    };

    let mut nrng = derive_rng(config.seed, &[index, 1]);
    let noise = garch_noise(&h, config.n_hours, &mut nrng);

    let mut mrng = derive_rng(config.seed, &[index, 2]);
    (0..config.n_hours)
        .map(|t| {
            let day = (t % 24) as f64;
            let week = (t % HOURS_PER_WEEK) as f64;
            let daily = (TAU * (day + h.daily_phase) / 24.0).sin()
                + h.second_harmonic * (2.0 * TAU * (day + h.daily_phase) / 24.0).sin();
            let weekly = (TAU * (week + h.weekly_phase) / HOURS_PER_WEEK as f64).sin();
            let level =
                h.base * (1.0 + h.daily_amp * daily + h.weekly_amp * weekly + h.slope * t as f64);
            let value = (level + noise[t]).max(0.0);
            let missing = config.missing_rate > 0.0 && mrng.random::<f64>() < config.missing_rate;
            (!missing).then_some(value)
        })
        .collect()
}

fn garch_noise<R: Rng>(h: &Household, n: usize, rng: &mut R) -> Vec<f64> {
    let target_sd = h.noise_sd * h.base;
    if target_sd == 0.0 {
        return vec![0.0; n];
    }
    let persistence = h.alpha + h.beta;
    let innovation_var = target_sd * target_sd * (1.0 - h.ar * h.ar);
    let omega = innovation_var * (1.0 - persistence);
    let mut sigma2 = innovation_var;
    let mut eps_prev = 0.0f64;
    let mut r = 0.0;
    let mut out = Vec::with_capacity(n);
    for t in 0..n + BURN_IN {
        sigma2 = omega + h.alpha * eps_prev * eps_prev + h.beta * sigma2;
        let z: f64 = StandardNormal.sample(rng);
        let eps = sigma2.sqrt() * z;
        r = h.ar * r + eps;
        eps_prev = eps;
        if t >= BURN_IN {
            out.push(r);
        }
    }
    out
}

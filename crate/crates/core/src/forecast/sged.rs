//! Skew generalized error distribution.
//!
//! A unit-variance generalized error distribution made asymmetric with the
//! Fernandez-Steel construction (scale `skew` on the right of the mode and
//! `1 / skew` on the left), then re-centred to zero mean and unit variance.
//! `shape = 2, skew = 1` is the standard normal; `skew = 1` is the symmetric
//! GED. `location` and `scale` are the mean and standard deviation.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgedParams {
    pub location: f64,
    pub scale: f64,
    /// Tail shape; 2 is Gaussian, smaller is heavier-tailed.
    pub shape: f64,
    /// Asymmetry; 1 is symmetric, above 1 skews right.
    pub skew: f64,
}

impl SgedParams {
    pub fn standard(shape: f64, skew: f64) -> Self {
        Self {
            location: 0.0,
            scale: 1.0,
            shape,
            skew,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sged {
    params: SgedParams,
    lambda: f64,
    mu: f64,
    sigma: f64,
    /// Mass left of the mode of the skewed (uncentred) variable.
    p_left: f64,
    ln_norm: f64,
    gamma: Gamma<f64>,
}

impl Sged {
    pub fn new(params: SgedParams) -> Result<Self> {
        let SgedParams {
            location,
            scale,
            shape,
            skew,
        } = params;
        if !(location.is_finite() && scale > 0.0 && scale.is_finite()) {
            return Err(invalid(format!(
                "SGED location/scale ({location}, {scale}) invalid"
            )));
        }
        if !(shape > 0.0 && shape.is_finite() && skew > 0.0 && skew.is_finite()) {
            return Err(invalid(format!(
                "SGED shape/skew ({shape}, {skew}) must be positive"
            )));
        }
        let nu = shape;
        let lambda =
            (2f64.powf(-2.0 / nu) * (ln_gamma(1.0 / nu) - ln_gamma(3.0 / nu)).exp()).sqrt();
        let m1 = 2f64.powf(1.0 / nu) * lambda * (ln_gamma(2.0 / nu) - ln_gamma(1.0 / nu)).exp();
        let xi = skew;
        let mu = m1 * (xi - 1.0 / xi);
        let sigma = ((1.0 - m1 * m1) * (xi * xi + 1.0 / (xi * xi)) + 2.0 * m1 * m1 - 1.0).sqrt();
        let ln_g =
            nu.ln() - lambda.ln() - (1.0 + 1.0 / nu) * std::f64::consts::LN_2 - ln_gamma(1.0 / nu);
        let ln_norm = (2.0 / (xi + 1.0 / xi)).ln() + sigma.ln() + ln_g;
        let gamma = Gamma::new(1.0 / nu, 1.0).map_err(|e| invalid(format!("SGED gamma: {e}")))?;
        Ok(Self {
            params,
            lambda,
            mu,
            sigma,
            p_left: 1.0 / (1.0 + xi * xi),
            ln_norm,
            gamma,
        })
    }

    pub fn params(&self) -> SgedParams {
        self.params
    }

    /// Log-density of the zero-mean, unit-variance member at `z`.
    #[inline]
    pub fn ln_density_standard(&self, z: f64) -> f64 {
        let zz = z * self.sigma + self.mu;
        let a = if zz >= 0.0 {
            zz / (self.params.skew * self.lambda)
        } else {
            -zz * self.params.skew / self.lambda
        };
        let tail = if self.params.shape == 2.0 {
            a * a
        } else {
            a.powf(self.params.shape)
        };
        self.ln_norm - 0.5 * tail
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        self.ln_density_standard((x - self.params.location) / self.params.scale)
            - self.params.scale.ln()
    }

    pub fn density(&self, x: f64) -> f64 {
        self.ln_density(x).exp()
    }

    /// Distribution function of the unit-variance GED.
    fn ged_cdf(&self, u: f64) -> f64 {
        let a = 0.5 * (u.abs() / self.lambda).powf(self.params.shape);
        if a == 0.0 {
            return 0.5;
        }
        let half = if a.is_finite() {
            0.5 * gamma_lr(1.0 / self.params.shape, a)
        } else {
            0.5
        };
        if u >= 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    }

    pub fn cdf_standard(&self, z: f64) -> f64 {
        let xi = self.params.skew;
        let zz = z * self.sigma + self.mu;
        let g = 2.0 / (xi + 1.0 / xi);
        let p = if zz < 0.0 {
            g / xi * self.ged_cdf(zz * xi)
        } else {
            self.p_left + g * xi * (self.ged_cdf(zz / xi) - 0.5)
        };
        p.clamp(0.0, 1.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_standard((x - self.params.location) / self.params.scale)
    }

    /// Inverse distribution function, solved by safeguarded Newton iteration.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(invalid(format!("quantile level {u} outside (0, 1)")));
        }
        let (mut lo, mut hi) = (-1.0, 1.0);
        while self.cdf_standard(lo) > u {
            lo *= 2.0;
        }
        while self.cdf_standard(hi) < u {
            hi *= 2.0;
        }
        let mut z = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.cdf_standard(z) - u;
            if f == 0.0 {
                break;
            }
            if f < 0.0 {
                lo = z;
            } else {
                hi = z;
            }
            let d = self.ln_density_standard(z).exp();
            let newton = z - f / d;
            let next = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - z).abs() <= 1e-14 * (1.0 + z.abs()) || hi - lo <= 1e-14 * (1.0 + z.abs()) {
                z = next;
                break;
            }
            z = next;
        }
        Ok(self.params.location + self.params.scale * z)
    }

    /// Draw from the zero-mean, unit-variance member.
    #[inline]
    pub fn sample_standard<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g: f64 = self.gamma.sample(rng);
        let magnitude = self.lambda * (2.0 * g).powf(1.0 / self.params.shape);
        let zz = if rng.random::<f64>() < self.p_left {
            -magnitude / self.params.skew
        } else {
            magnitude * self.params.skew
        };
        (zz - self.mu) / self.sigma
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.params.location + self.params.scale * self.sample_standard(rng)
    }
}

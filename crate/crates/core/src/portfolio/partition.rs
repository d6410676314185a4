use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Panel, HOURS_PER_WEEK};
use crate::error::{invalid, Error, Result};
use crate::forecast::{forecast_candidates, ForecastConfig, ModelSelector};
use crate::rng::derive_seed;

/// One band `(lower, upper)` of target aggregate demand at a lead time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub index: usize,
    pub lead_time: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Partition {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Strictly inside the band.
    pub fn contains(&self, demand: f64) -> bool {
        demand > self.lower && demand < self.upper
    }

    /// Distance from `demand` to the band; zero inside or on its edge.
    pub fn violation(&self, demand: f64) -> f64 {
        (self.lower - demand).max(demand - self.upper).max(0.0)
    }
}

/// Splits `[0, sum(forecasts)]` into `k` equal-width partitions.
pub fn partition_demand_range(
    forecasts: &[f64],
    k: usize,
    lead_time: usize,
) -> Result<Vec<Partition>> {
    if k == 0 {
        return Err(invalid("at least one partition is required"));
    }
    let total: f64 = forecasts.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(invalid(format!(
            "total forecast demand {total} must be positive"
        )));
    }
    let edge = |i: usize| {
        if i == k {
            total
        } else {
            total * i as f64 / k as f64
        }
    };
    Ok((0..k)
        .map(|i| Partition {
            index: i,
            lead_time,
            lower: edge(i),
            upper: edge(i + 1),
        })
        .collect())
}

/// Whether some selection of at most `max_selected` households can land
/// strictly inside the partition. Exact for the upper side; the lower side
/// uses the largest achievable sum.
pub fn partition_reachable(partition: &Partition, forecasts: &[f64], max_selected: usize) -> bool {
    let mut sorted = forecasts.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = sorted.iter().take(max_selected).sum();
    let smallest = sorted
        .iter()
        .copied()
        .filter(|&f| f > 0.0)
        .fold(f64::INFINITY, f64::min);
    top > partition.lower && smallest < partition.upper
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFallback {
    pub household: String,
    pub reason: String,
}

/// Per-household point forecasts `Y_hat(h)` at several lead times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointForecasts {
    pub leads: Vec<usize>,
    /// `values[l][i]`: household `i` at `leads[l]`.
    pub values: Vec<Vec<f64>>,
    pub fallbacks: Vec<PointFallback>,
}

impl PointForecasts {
    pub fn at(&self, lead: usize) -> Option<&[f64]> {
        self.leads
            .iter()
            .position(|&l| l == lead)
            .map(|i| self.values[i].as_slice())
    }
}

/// Point forecasts for every household from the end of `history`: projected
/// seasonal and trend plus the mean of the remainder model chosen by
/// `selector`. A household whose models cannot be fitted falls back to its
/// value one week before the target, and is listed in `fallbacks`.
/// Forecasts are floored at zero.
pub fn household_point_forecasts(
    history: &Panel,
    leads: &[usize],
    cfg: &ForecastConfig,
    selector: &ModelSelector,
    seed: u64,
) -> Result<PointForecasts> {
    let n = history.len();
    if n < 2 * HOURS_PER_WEEK {
        return Err(Error::TooShort {
            required: 2 * HOURS_PER_WEEK,
            actual: n,
        });
    }
    let max_lead = leads
        .iter()
        .copied()
        .max()
        .ok_or_else(|| invalid("no lead times"))?;
    if leads.contains(&0) || max_lead > HOURS_PER_WEEK {
        return Err(invalid(format!(
            "lead times must lie in 1..={HOURS_PER_WEEK}"
        )));
    }
    let per_household: Vec<(Vec<f64>, Option<String>)> = (0..history.n_households())
        .into_par_iter()
        .map(|i| {
            let y = history.column(i);
            let naive = |lead: usize| y[n - HOURS_PER_WEEK + lead - 1];
            let modelled = forecast_candidates(y, max_lead, cfg, derive_seed(seed, &[i as u64]))
                .and_then(|c| {
                    leads
                        .iter()
                        .map(|&lead| {
                            c.choose(lead, selector.threshold(lead))
                                .map(|(_, f)| f.mean())
                                .ok_or_else(|| invalid(format!("no forecast at lead {lead}")))
                        })
                        .collect::<Result<Vec<f64>>>()
                });
            match modelled {
                Ok(v) => (v.into_iter().map(|x| x.max(0.0)).collect(), None),
                Err(e) => (
                    leads.iter().map(|&l| naive(l).max(0.0)).collect(),
                    Some(e.to_string()),
                ),
            }
        })
        .collect();
    let mut values = vec![Vec::with_capacity(history.n_households()); leads.len()];
    let mut fallbacks = Vec::new();
    for (i, (v, reason)) in per_household.into_iter().enumerate() {
        for (l, x) in v.into_iter().enumerate() {
            values[l].push(x);
        }
        if let Some(reason) = reason {
            log::warn!(
                "household {}: seasonal-naive point forecast ({reason})",
                history.household_ids()[i]
            );
            fallbacks.push(PointFallback {
                household: history.household_ids()[i].clone(),
                reason,
            });
        }
    }
    Ok(PointForecasts {
        leads: leads.to_vec(),
        values,
        fallbacks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_split() {
        let p = partition_demand_range(&[40.0, 60.0], 10, 4).unwrap();
        assert_eq!(p.len(), 10);
        for (i, part) in p.iter().enumerate() {
            assert!((part.lower - 10.0 * i as f64).abs() < 1e-12);
            assert!((part.upper - 10.0 * (i + 1) as f64).abs() < 1e-12);
        }
        assert_eq!(p[9].upper, 100.0);
        assert!(p.windows(2).all(|w| w[0].upper == w[1].lower));
        let one = partition_demand_range(&[1.0, 2.0], 1, 4).unwrap();
        assert_eq!((one[0].lower, one[0].upper), (0.0, 3.0));
        assert!(partition_demand_range(&[0.0], 3, 4).is_err());
        assert!(partition_demand_range(&[1.0], 0, 4).is_err());
    }

    #[test]
    fn containment_is_strict() {
        let p = Partition {
            index: 0,
            lead_time: 1,
            lower: 1.0,
            upper: 2.0,
        };
        assert!(p.contains(1.5) && !p.contains(1.0) && !p.contains(2.0));
        assert_eq!(p.violation(0.5), 0.5);
        assert_eq!(p.violation(2.25), 0.25);
        assert_eq!(p.violation(1.5), 0.0);
    }

    #[test]
    fn reachability() {
        let p = Partition {
            index: 2,
            lead_time: 1,
            lower: 5.0,
            upper: 6.0,
        };
        assert!(partition_reachable(&p, &[3.0, 3.0, 1.0], 2));
        assert!(!partition_reachable(&p, &[3.0, 1.0, 1.0], 2));
        assert!(!partition_reachable(&p, &[7.0, 8.0], 2));
    }

    #[test]
    fn periodic_and_constant_households() {
        let n = 4 * HOURS_PER_WEEK;
        let periodic: Vec<f64> = (0..n)
            .map(|t| {
                1.0 + 0.5 * (t as f64 * std::f64::consts::TAU / 24.0).sin()
                    + 0.01 * ((t * 37) % 11) as f64
            })
            .collect();
        let constant = vec![0.7; n];
        let panel = Panel::from_columns(vec![periodic.clone(), constant]).unwrap();
        let cfg = ForecastConfig {
            ensemble_size: 200,
            ..Default::default()
        };
        let pf = household_point_forecasts(&panel, &[4, 24], &cfg, &ModelSelector::default(), 1)
            .unwrap();
        assert_eq!(pf.values[0].len(), 2);
        for (l, &lead) in [4usize, 24].iter().enumerate() {
            let week_ago = periodic[n - HOURS_PER_WEEK + lead - 1];
            assert!(
                (pf.values[l][0] - week_ago).abs() <= 0.01 * week_ago + 0.05,
                "{:?}",
                pf.values[l]
            );
            assert!((pf.values[l][1] - 0.7).abs() < 1e-9);
        }
        // the constant household has no variance to model
        assert_eq!(pf.fallbacks.len(), 1);
        assert_eq!(pf.fallbacks[0].household, panel.household_ids()[1]);
    }
}

//! Per-lead tuning of the SS weight `r`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ga::{ga_optimize, GaConfig, GaResult};
use super::objective::{SsObjective, SsWeighting};
use super::partition::Partition;
use super::selection::SelectionVector;
use crate::error::{invalid, Result};

pub fn default_ss_grid() -> Vec<f64> {
    vec![0.0, 0.2, 0.5, 0.8, 1.0]
}

/// SS weight per lead time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsConfig {
    pub weights: BTreeMap<usize, f64>,
    pub default_weight: f64,
    pub weighting: SsWeighting,
}

impl Default for SsConfig {
    fn default() -> Self {
        Self {
            weights: BTreeMap::new(),
            default_weight: 0.5,
            weighting: SsWeighting::PerLead,
        }
    }
}

impl SsConfig {
    pub fn weight(&self, lead: usize) -> f64 {
        self.weights
            .get(&lead)
            .copied()
            .unwrap_or(self.default_weight)
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .weights
            .values()
            .chain(std::iter::once(&self.default_weight));
        if all.into_iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(invalid("SS weights must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// The partitions to optimize at one lead time, with the household point
/// forecasts that define their constraint.
#[derive(Debug, Clone)]
pub struct LeadProblem<'a> {
    pub lead: usize,
    pub partitions: Vec<Partition>,
    pub forecasts: &'a [f64],
}

/// One SS optimization run during tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsCandidate {
    pub lead: usize,
    pub weight: f64,
    pub partition: usize,
    pub result: Option<GaResult>,
    /// Validation CRPS of the selected portfolio.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsTuning {
    pub config: SsConfig,
    /// `(lead, r, mean validation CRPS over partitions)`.
    pub table: Vec<(usize, f64, f64)>,
    pub candidates: Vec<SsCandidate>,
}

impl SsTuning {
    /// The optimized portfolio for `(lead, partition)` at the chosen weight.
    pub fn chosen(&self, lead: usize, partition: usize) -> Option<&GaResult> {
        let r = self.config.weight(lead);
        self.candidates
            .iter()
            .find(|c| c.lead == lead && c.partition == partition && c.weight == r)
            .and_then(|c| c.result.as_ref())
    }
}

/// For every lead and every `r` in `grid`, optimizes SS on each partition and
/// scores the portfolio with `validate(selection, lead)`; keeps the `r` with
/// the smallest mean score (ties to the earlier grid value).
pub fn tune_ss_weight<V>(
    ss: &SsObjective,
    problems: &[LeadProblem<'_>],
    grid: &[f64],
    weighting: SsWeighting,
    ga: &GaConfig,
    validate: V,
) -> Result<SsTuning>
where
    V: Fn(&SelectionVector, usize) -> f64,
{
    if grid.is_empty() {
        return Err(invalid("SS weight grid is empty"));
    }
    if let Some(r) = grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(invalid(format!("SS weight {r} outside [0, 1]")));
    }
    let mut config = SsConfig {
        weighting,
        ..SsConfig::default()
    };
    let mut table = Vec::new();
    let mut candidates = Vec::new();
    for problem in problems {
        let mut best: Option<(f64, f64)> = None;
        for &r in grid {
            let objective = ss.with_weight(r, problem.lead, weighting)?;
            let mut scores = Vec::new();
            for p in &problem.partitions {
                let result = ga_optimize(&objective, p, problem.forecasts, ga).ok();
                let score = result
                    .as_ref()
                    .map_or(f64::INFINITY, |g| validate(&g.selection, problem.lead));
                if score.is_finite() {
                    scores.push(score);
                }
                candidates.push(SsCandidate {
                    lead: problem.lead,
                    weight: r,
                    partition: p.index,
                    result,
                    score,
                });
            }
            let mean = if scores.is_empty() {
                f64::INFINITY
            } else {
                scores.iter().sum::<f64>() / scores.len() as f64
            };
            log::debug!(
                "SS weight {r} at lead {}: mean validation CRPS {mean}",
                problem.lead
            );
            table.push((problem.lead, r, mean));
            if best.is_none_or(|(_, b)| mean < b) {
                best = Some((r, mean));
            }
        }
        if let Some((r, _)) = best {
            config.weights.insert(problem.lead, r);
        }
    }
    Ok(SsTuning {
        config,
        table,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::objective::HouseholdDispersion;

    fn setup() -> (SsObjective, Vec<f64>, Partition) {
        let dispersion = (0..6)
            .map(|i| {
                Some(HouseholdDispersion {
                    systematic: 0.1 + 0.05 * i as f64,
                    remainder: 0.4 - 0.05 * i as f64,
                })
            })
            .collect();
        let p = Partition {
            index: 0,
            lead_time: 4,
            lower: 1.5,
            upper: 2.5,
        };
        (SsObjective::from_dispersion(dispersion), vec![1.0; 6], p)
    }

    #[test]
    fn single_value_grid_is_returned_for_every_lead() {
        let (ss, f, p) = setup();
        let problems: Vec<LeadProblem> = [4, 12, 24]
            .iter()
            .map(|&lead| LeadProblem {
                lead,
                partitions: vec![Partition {
                    lead_time: lead,
                    ..p
                }],
                forecasts: &f,
            })
            .collect();
        let t = tune_ss_weight(
            &ss,
            &problems,
            &[0.8],
            SsWeighting::PerLead,
            &GaConfig::default(),
            |_, _| 1.0,
        )
        .unwrap();
        assert_eq!(t.config.weights.len(), 3);
        assert!(t.config.weights.values().all(|&r| r == 0.8));
        assert!(tune_ss_weight(
            &ss,
            &problems,
            &[],
            SsWeighting::PerLead,
            &GaConfig::default(),
            |_, _| 1.0
        )
        .is_err());
    }

    #[test]
    fn picks_the_weight_whose_portfolio_validates_best() {
        let (ss, f, p) = setup();
        let problems = vec![LeadProblem {
            lead: 4,
            partitions: vec![p],
            forecasts: &f,
        }];
        // validation prefers the households with low remainder dispersion (high index)
        let validate =
            |v: &SelectionVector, _: usize| v.selected().map(|i| 6.0 - i as f64).sum::<f64>();
        let t = tune_ss_weight(
            &ss,
            &problems,
            &default_ss_grid(),
            SsWeighting::PerLead,
            &GaConfig::default(),
            validate,
        )
        .unwrap();
        assert_eq!(t.config.weight(4), 0.0);
        assert_eq!(t.chosen(4, 0).unwrap().selection.bitmap(), "000011");
        assert_eq!(t.table.len(), 5);
    }
}

use serde::{Deserialize, Serialize};

use super::Panel;
use crate::error::{invalid, Result};
use crate::portfolio::SelectionVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMode {
    /// Weighted sum of the selected households' demand.
    #[default]
    Sum,
    /// Weighted sum divided by the total weight.
    Average,
}

/// Aggregated demand of the households picked by `selection`.
pub fn aggregate(
    panel: &Panel,
    selection: &SelectionVector,
    mode: AggregateMode,
) -> Result<Vec<f64>> {
    aggregate_weights(panel, selection.weights(), mode)
}

/// Per-timestep weighted combination of panel columns.
pub fn aggregate_weights(panel: &Panel, weights: &[f64], mode: AggregateMode) -> Result<Vec<f64>> {
    if weights.len() != panel.n_households() {
        return Err(invalid(format!(
            "selection has {} weights for {} households",
            weights.len(),
            panel.n_households()
        )));
    }
    let total: f64 = weights.iter().sum();
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(invalid("selection contains no household"));
    }
    let mut out = vec![0.0; panel.len()];
    for (col, &w) in panel.columns().iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(col) {
            *o += w * v;
        }
    }
    if mode == AggregateMode::Average {
        out.iter_mut().for_each(|o| *o /= total);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_of_identical_households() {
        let p = Panel::from_columns(vec![vec![1.0; 5]; 3]).unwrap();
        let sel = SelectionVector::all(3);
        assert_eq!(
            aggregate(&p, &sel, AggregateMode::Average).unwrap(),
            vec![1.0; 5]
        );
    }

    #[test]
    fn weighted_sum() {
        let p = Panel::from_columns(vec![vec![2.0; 4], vec![5.0; 4], vec![4.0; 4]]).unwrap();
        let sel = SelectionVector::from_bits(&[true, false, true]);
        assert_eq!(
            aggregate(&p, &sel, AggregateMode::Sum).unwrap(),
            vec![6.0; 4]
        );
    }

    #[test]
    fn empty_selection_rejected() {
        let p = Panel::from_columns(vec![vec![1.0; 4]; 2]).unwrap();
        assert!(aggregate_weights(&p, &[0.0, 0.0], AggregateMode::Sum).is_err());
        assert!(aggregate_weights(&p, &[1.0], AggregateMode::Sum).is_err());
    }

    #[test]
    fn copies_average_to_original() {
        let col: Vec<f64> = (0..50)
            .map(|t| (t as f64 * 0.37).sin().abs() * 3.1)
            .collect();
        let p = Panel::from_columns(vec![col.clone(); 7]).unwrap();
        let avg = aggregate(&p, &SelectionVector::all(7), AggregateMode::Average).unwrap();
        for (a, b) in avg.iter().zip(&col) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Each household is in (1) or out (0).
    Binary,
    /// Each household contributes a fraction in [0, 1] of its demand.
    Relaxed,
}

/// Household-inclusion vector of a portfolio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionVector {
    weights: Vec<f64>,
    mode: SelectionMode,
}

impl SelectionVector {
    pub fn from_bits(bits: &[bool]) -> Self {
        Self {
            weights: bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            mode: SelectionMode::Binary,
        }
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Self {
        let mut bits = vec![false; n];
        for &i in indices {
            bits[i] = true;
        }
        Self::from_bits(&bits)
    }

    pub fn all(n: usize) -> Self {
        Self::from_bits(&vec![true; n])
    }

    /// Relaxed selection; every weight must lie in [0, 1].
    pub fn relaxed(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(invalid(format!("relaxed weight {w} outside [0, 1]")));
        }
        Ok(Self {
            weights,
            mode: SelectionMode::Relaxed,
        })
    }

    pub fn mode(&self) -> SelectionMode {
        self.mode
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Number of households with a positive weight.
    pub fn count(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, _)| i)
    }

    /// Expected aggregate demand `forecasts . v`.
    pub fn dot(&self, forecasts: &[f64]) -> f64 {
        self.weights.iter().zip(forecasts).map(|(w, f)| w * f).sum()
    }

    /// `0`/`1` string, one character per household (positive weight = `1`).
    pub fn bitmap(&self) -> String {
        self.weights
            .iter()
            .map(|&w| if w > 0.0 { '1' } else { '0' })
            .collect()
    }

    /// Exact hashable identity of the weights.
    pub fn key(&self) -> Vec<u64> {
        match self.mode {
            SelectionMode::Binary => {
                let mut words = vec![0u64; self.weights.len().div_ceil(64)];
                for i in self.selected() {
                    words[i / 64] |= 1 << (i % 64);
                }
                words
            }
            SelectionMode::Relaxed => self.weights.iter().map(|w| w.to_bits()).collect(),
        }
    }

    /// Checks the mode-specific invariants and that something is selected.
    pub fn validate(&self) -> Result<()> {
        let ok = match self.mode {
            SelectionMode::Binary => self.weights.iter().all(|&w| w == 0.0 || w == 1.0),
            SelectionMode::Relaxed => self.weights.iter().all(|w| (0.0..=1.0).contains(w)),
        };
        if !ok {
            return Err(invalid("selection weights violate their mode"));
        }
        if self.is_empty() {
            return Err(invalid("selection contains no household"));
        }
        Ok(())
    }
}

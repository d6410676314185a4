use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::stats::is_prime;

/// One sliding-window sample: train on `[train_start, train_end)`, forecast
/// and score on `[train_end, test_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub train_start: usize,
    pub train_end: usize,
    pub test_end: usize,
}

impl Window {
    pub fn train(&self) -> Range<usize> {
        self.train_start..self.train_end
    }

    pub fn test(&self) -> Range<usize> {
        self.train_end..self.test_end
    }

    /// Index of the observation `lead` hours after the forecast origin (`lead >= 1`).
    pub fn target(&self, lead: usize) -> usize {
        self.train_end + lead - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub train_length: usize,
    pub horizon: usize,
    pub stride: usize,
    pub windows: Vec<Window>,
}

impl WindowPlan {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Maximal set of windows over a series of length `n`, starting at 0 and
/// advancing by a prime `stride`.
pub fn make_windows(
    n: usize,
    train_length: usize,
    horizon: usize,
    stride: usize,
) -> Result<WindowPlan> {
    make_windows_in(0..n, train_length, horizon, stride)
}

/// Like [`make_windows`] but confined to `span`; every train and test range
/// lies inside it.
pub fn make_windows_in(
    span: Range<usize>,
    train_length: usize,
    horizon: usize,
    stride: usize,
) -> Result<WindowPlan> {
    if !is_prime(stride) {
        return Err(Error::NotPrime(stride));
    }
    if train_length == 0 || horizon == 0 {
        return Err(crate::error::invalid(
            "train length and horizon must be positive",
        ));
    }
    let required = train_length + horizon;
    let available = span.end.saturating_sub(span.start);
    if available < required {
        return Err(Error::TooShort {
            required,
            actual: available,
        });
    }
    let count = (available - required) / stride + 1;
    let windows = (0..count)
        .map(|i| {
            let train_start = span.start + i * stride;
            Window {
                train_start,
                train_end: train_start + train_length,
                test_end: train_start + required,
            }
        })
        .collect();
    Ok(WindowPlan {
        train_length,
        horizon,
        stride,
        windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exactly_one_window() {
        let plan = make_windows(2016 + 72, 2016, 72, 97).unwrap();
        assert_eq!(plan.len(), 1);
    }

    #[test]
    fn two_windows_one_stride_apart() {
        let plan = make_windows(2016 + 72 + 97, 2016, 72, 97).unwrap();
        let starts: Vec<usize> = plan.windows.iter().map(|w| w.train_start).collect();
        assert_eq!(starts, vec![0, 97]);
    }

    #[test]
    fn composite_stride_rejected() {
        assert!(matches!(
            make_windows(5000, 2016, 72, 100),
            Err(Error::NotPrime(100))
        ));
    }

    #[test]
    fn short_panel_reports_minimum() {
        match make_windows(100, 2016, 72, 97) {
            Err(Error::TooShort { required, .. }) => assert_eq!(required, 2088),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lead_targets() {
        let w = Window {
            train_start: 0,
            train_end: 10,
            test_end: 13,
        };
        assert_eq!(w.target(1), 10);
        assert_eq!(w.target(3), 12);
    }

    proptest! {
        #[test]
        fn windows_fit_and_count(n in 50usize..3000, train in 10usize..400, horizon in 1usize..80,
                                 stride in prop::sample::select(vec![2usize, 3, 5, 7, 11, 13, 97, 101])) {
            prop_assume!(n >= train + horizon);
            let plan = make_windows(n, train, horizon, stride).unwrap();
            prop_assert_eq!(plan.len(), (n - train - horizon) / stride + 1);
            for w in &plan.windows {
                prop_assert!(w.test_end <= n);
                prop_assert_eq!(w.train_end - w.train_start, train);
            }
            for pair in plan.windows.windows(2) {
                prop_assert_eq!(pair[1].train_start - pair[0].train_start, stride);
            }
        }
    }
}

use super::{Panel, RawPanel, HOURS_PER_WEEK};
use crate::error::{Error, Result};

/// Fills each missing slot with the observed value at the same hour of the
/// same weekday one week earlier.
///
/// When that slot is missing too, earlier weeks are tried, then later weeks.
/// A slot whose weekly position is never observed falls back to the same hour
/// on the nearest observed day, and finally to the nearest observation.
pub fn impute_missing(panel: &RawPanel) -> Result<Panel> {
    let mut columns = Vec::with_capacity(panel.n_households());
    for (i, id) in panel.household_ids().iter().enumerate() {
        let col = panel.column(i);
        if col.iter().all(Option::is_none) {
            return Err(Error::AllMissing(id.clone()));
        }
        let filled = (0..col.len())
            .map(|t| col[t].unwrap_or_else(|| fill_slot(col, t)))
            .collect();
        columns.push(filled);
    }
    Panel::new(panel.start(), panel.household_ids().to_vec(), columns)
}

fn fill_slot(col: &[Option<f64>], t: usize) -> f64 {
    for lag in [HOURS_PER_WEEK, 24, 1] {
        if let Some(v) = walk(col, t, lag) {
            return v;
        }
    }
    unreachable!("column has at least one observation")
}

fn walk(col: &[Option<f64>], t: usize, lag: usize) -> Option<f64> {
    let back = (1..=t / lag).map(|k| t - k * lag);
    let forward = (1..).map(|k| t + k * lag).take_while(|&s| s < col.len());
    back.chain(forward).find_map(|s| col[s])
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn raw(col: Vec<Option<f64>>) -> RawPanel {
        let start = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        RawPanel::new(start, vec!["a".into()], vec![col]).unwrap()
    }

    fn two_weeks() -> Vec<Option<f64>> {
        (0..2 * HOURS_PER_WEEK).map(|t| Some(t as f64)).collect()
    }

    #[test]
    fn previous_week_same_hour() {
        let mut col = two_weeks();
        // 2024-01-09 is a Tuesday; 14:00 that day
        let t = HOURS_PER_WEEK + 24 + 14;
        col[t] = None;
        let p = impute_missing(&raw(col)).unwrap();
        assert_eq!(p.column(0)[t], (t - HOURS_PER_WEEK) as f64);
    }

    #[test]
    fn first_week_uses_following_week() {
        let mut col = two_weeks();
        col[5] = None;
        let p = impute_missing(&raw(col)).unwrap();
        assert_eq!(p.column(0)[5], (5 + HOURS_PER_WEEK) as f64);
    }

    #[test]
    fn walks_back_past_missing_week() {
        let mut col: Vec<Option<f64>> = (0..3 * HOURS_PER_WEEK).map(|t| Some(t as f64)).collect();
        col[10 + HOURS_PER_WEEK] = None;
        col[10 + 2 * HOURS_PER_WEEK] = None;
        let p = impute_missing(&raw(col)).unwrap();
        assert_eq!(p.column(0)[10 + 2 * HOURS_PER_WEEK], 10.0);
    }

    #[test]
    fn complete_panel_unchanged() {
        let col = two_weeks();
        let p = impute_missing(&raw(col.clone())).unwrap();
        let expected: Vec<f64> = col.into_iter().flatten().collect();
        assert_eq!(p.column(0), expected.as_slice());
    }

    #[test]
    fn short_panel_falls_back_to_daily_slot() {
        let mut col: Vec<Option<f64>> = (0..48).map(|t| Some(t as f64)).collect();
        col[30] = None;
        let p = impute_missing(&raw(col)).unwrap();
        assert_eq!(p.column(0)[30], 6.0);
    }

    #[test]
    fn all_missing_household_named() {
        let err = impute_missing(&raw(vec![None; 10])).unwrap_err();
        assert!(err.to_string().contains('a'));
        assert!(matches!(err, Error::AllMissing(id) if id == "a"));
    }

    #[test]
    fn idempotent() {
        let mut col = two_weeks();
        for t in [0, 7, 100, 200, 300] {
            col[t] = None;
        }
        let once = impute_missing(&raw(col)).unwrap();
        let twice = impute_missing(&RawPanel::from(once.clone())).unwrap();
        assert_eq!(once, twice);
    }
}

use chrono::{DateTime, Duration, DurationRound, Timelike, Utc};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{Read, Write};

use super::{fmt_ts, Panel, RawPanel};
use crate::error::{invalid, Error, Result};

/// One smart-meter reading. `demand` is `None` when the meter reported nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterReading {
    pub timestamp: DateTime<Utc>,
    pub household_id: String,
    pub demand: Option<f64>,
}

impl MeterReading {
    pub fn new(
        timestamp: DateTime<Utc>,
        household_id: impl Into<String>,
        demand: Option<f64>,
    ) -> Self {
        Self {
            timestamp,
            household_id: household_id.into(),
            demand,
        }
    }
}

/// Reading interval of the input stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    #[default]
    Hourly,
    /// Two readings per hour, stamped at :00 and :30 (interval start); summed into the hour.
    HalfHourly,
}

struct HouseholdSlots {
    last: Option<(DateTime<Utc>, Option<f64>)>,
    // hour start -> (sum, observed halves, any missing half)
    hours: HashMap<DateTime<Utc>, (f64, u8, bool)>,
}

/// Assembles a stream of readings into an hourly grid.
///
/// Slots with no reading, or (half-hourly) with a missing half, are left
/// missing. Timestamps must be strictly increasing per household.
pub fn ingest<I>(readings: I, resolution: Resolution) -> Result<RawPanel>
where
    I: IntoIterator<Item = MeterReading>,
{
    let mut order: Vec<String> = Vec::new();
    let mut households: HashMap<String, HouseholdSlots> = HashMap::new();

    for r in readings {
        if let Some(v) = r.demand {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(format!(
                    "household {} at {}: demand {v} is not a non-negative number",
                    r.household_id,
                    fmt_ts(r.timestamp)
                )));
            }
        }
        let slot = check_alignment(&r, resolution)?;
        let entry = households.entry(r.household_id.clone()).or_insert_with(|| {
            order.push(r.household_id.clone());
            HouseholdSlots {
                last: None,
                hours: HashMap::new(),
            }
        });
        if let Some((prev_ts, prev_val)) = entry.last {
            if r.timestamp == prev_ts {
                return Err(Error::DuplicateReading {
                    household: r.household_id,
                    timestamp: fmt_ts(prev_ts),
                    first: fmt_value(prev_val),
                    second: fmt_value(r.demand),
                });
            }
            if r.timestamp < prev_ts {
                return Err(Error::NonMonotoneTimestamps {
                    household: r.household_id,
                    previous: fmt_ts(prev_ts),
                    next: fmt_ts(r.timestamp),
                });
            }
        }
        entry.last = Some((r.timestamp, r.demand));
        let cell = entry.hours.entry(slot).or_insert((0.0, 0, false));
        match r.demand {
            Some(v) => {
                cell.0 += v;
                cell.1 += 1;
            }
            None => cell.2 = true,
        }
    }

    if order.is_empty() {
        return Err(invalid("no readings"));
    }
    let all_hours = households.values().flat_map(|h| h.hours.keys().copied());
    let first = all_hours.clone().min().expect("non-empty");
    let last = all_hours.max().expect("non-empty");
    let len = ((last - first).num_hours() + 1) as usize;
    let needed: u8 = match resolution {
        Resolution::Hourly => 1,
        Resolution::HalfHourly => 2,
    };

    let columns = order
        .iter()
        .map(|id| {
            let slots = &households[id].hours;
            (0..len)
                .map(|t| {
                    let hour = first + Duration::hours(t as i64);
                    match slots.get(&hour) {
                        Some(&(sum, n, missing)) if n == needed && !missing => Some(sum),
                        _ => None,
                    }
                })
                .collect()
        })
        .collect();
    RawPanel::new(first, order, columns)
}

fn check_alignment(r: &MeterReading, resolution: Resolution) -> Result<DateTime<Utc>> {
    let ts = r.timestamp;
    let aligned = ts.second() == 0
        && ts.nanosecond() == 0
        && match resolution {
            Resolution::Hourly => ts.minute() == 0,
            Resolution::HalfHourly => ts.minute() == 0 || ts.minute() == 30,
        };
    if !aligned {
        return Err(invalid(format!(
            "household {}: timestamp {} is not on a {:?} boundary",
            r.household_id,
            fmt_ts(ts),
            resolution
        )));
    }
    Ok(ts
        .duration_trunc(Duration::hours(1))
        .expect("hour truncation"))
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "<missing>".to_string(), |x| x.to_string())
}

#[derive(Debug, Deserialize, Serialize)]
struct CsvRow {
    timestamp: String,
    household_id: String,
    kwh: Option<f64>,
}

/// Reads `timestamp,household_id,kwh` rows; an empty `kwh` field is a missing value.
pub fn read_readings<R: Read>(reader: R) -> Result<Vec<MeterReading>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["timestamp", "household_id", "kwh"] {
        return Err(invalid(format!(
            "expected header timestamp,household_id,kwh, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: CsvRow = row?;
        let timestamp = DateTime::parse_from_rfc3339(&row.timestamp)?.with_timezone(&Utc);
        out.push(MeterReading::new(timestamp, row.household_id, row.kwh));
    }
    Ok(out)
}

/// Writes a panel in the ingestion schema, time-major, missing slots as empty fields.
pub fn write_panel_csv<W: Write>(panel: &RawPanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "household_id", "kwh"])?;
    for t in 0..panel.len() {
        let ts = fmt_ts(panel.start() + Duration::hours(t as i64));
        for (i, id) in panel.household_ids().iter().enumerate() {
            let kwh = panel.column(i)[t].map_or_else(String::new, |v| format!("{v:.6}"));
            w.write_record([ts.as_str(), id.as_str(), kwh.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}

impl Panel {
    /// Writes the complete panel in the ingestion CSV schema.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_panel_csv(&RawPanel::from(self.clone()), writer)
    }
}

//! Date-indexed daily series and aligned panels.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum number of pre-event days a panel must carry for model fitting.
pub const MIN_PRE_DAYS: usize = 30;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("series '{0}' is empty")]
    Empty(String),
    #[error("series '{id}' has non-finite value at index {index}")]
    NonFinite { id: String, index: usize },
    #[error("series '{id}' has negative value {value} at index {index}")]
    Negative { id: String, index: usize, value: f64 },
    #[error("calendar end {end} precedes start {start}")]
    CalendarOrder { start: NaiveDate, end: NaiveDate },
    #[error("series '{id}' does not align with panel calendar (start {start}, len {len})")]
    Misaligned { id: String, start: NaiveDate, len: usize },
    #[error("event day index {event} outside calendar of {len} days")]
    EventOutOfRange { event: usize, len: usize },
    #[error("pre-period has {got} days, need at least {need}")]
    PreTooShort { got: usize, need: usize },
}

/// What a series' values measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesUnit {
    Count,
    Amount,
    Ratio,
    Normalized,
}

/// A gap-free run of daily values starting at `start_date`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySeries {
    pub id: String,
    pub start_date: NaiveDate,
    pub values: Vec<f64>,
    pub unit: SeriesUnit,
}

impl DailySeries {
    /// Builds a series, requiring at least one finite value per day.
    pub fn new(
        id: impl Into<String>,
        start_date: NaiveDate,
        values: Vec<f64>,
        unit: SeriesUnit,
    ) -> Result<Self, SeriesError> {
        let id = id.into();
        if values.is_empty() {
            return Err(SeriesError::Empty(id));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite { id, index });
        }
        Ok(Self { id, start_date, values, unit })
    }

    /// Builds a measured (count/amount/normalized) series, which must be
    /// non-negative in addition to finite.
    pub fn new_measured(
        id: impl Into<String>,
        start_date: NaiveDate,
        values: Vec<f64>,
        unit: SeriesUnit,
    ) -> Result<Self, SeriesError> {
        let s = Self::new(id, start_date, values, unit)?;
        if let Some(index) = s.values.iter().position(|v| *v < 0.0) {
            return Err(SeriesError::Negative {
                id: s.id,
                index,
                value: s.values[index],
            });
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.start_date + chrono::Duration::days(index as i64)
    }

    /// Centered moving average with window `w` (odd windows are symmetric;
    /// the window truncates at the series boundaries).
    pub fn moving_average(&self, w: usize) -> Vec<f64> {
        moving_average(&self.values, w)
    }
}

/// Centered moving average over a slice, truncating at the edges.
pub fn moving_average(values: &[f64], w: usize) -> Vec<f64> {
    let n = values.len();
    if w <= 1 || n == 0 {
        return values.to_vec();
    }
    let half = w / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// An inclusive run of calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub start: NaiveDate,
    pub days: usize,
}

impl Calendar {
    /// Calendar covering `start..=end`.
    pub fn from_range(start: NaiveDate, end: NaiveDate) -> Result<Self, SeriesError> {
        if end < start {
            return Err(SeriesError::CalendarOrder { start, end });
        }
        let days = (end - start).num_days() as usize + 1;
        Ok(Self { start, days })
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start).num_days();
        if offset < 0 || offset as usize >= self.days {
            None
        } else {
            Some(offset as usize)
        }
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.start + chrono::Duration::days(index as i64)
    }

    pub fn end(&self) -> NaiveDate {
        self.date_at(self.days - 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.days).map(|i| self.date_at(i))
    }
}

/// Target plus control series over a common calendar, with the event day
/// ("day 0") marked. The pre-period is every index strictly before
/// `event_day_index`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesPanel {
    pub target: DailySeries,
    pub controls: Vec<DailySeries>,
    pub event_day_index: usize,
}

impl SeriesPanel {
    pub fn new(
        target: DailySeries,
        controls: Vec<DailySeries>,
        event_day_index: usize,
    ) -> Result<Self, SeriesError> {
        let start = target.start_date;
        let len = target.len();
        for c in &controls {
            if c.start_date != start || c.len() != len {
                return Err(SeriesError::Misaligned {
                    id: c.id.clone(),
                    start,
                    len,
                });
            }
        }
        if event_day_index >= len {
            return Err(SeriesError::EventOutOfRange { event: event_day_index, len });
        }
        if event_day_index < MIN_PRE_DAYS {
            return Err(SeriesError::PreTooShort { got: event_day_index, need: MIN_PRE_DAYS });
        }
        Ok(Self { target, controls, event_day_index })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn control(&self, label: &str) -> Option<&DailySeries> {
        self.controls.iter().find(|c| c.id == label)
    }

    /// Number of days from the event day to the end of the calendar.
    pub fn post_len(&self) -> usize {
        self.len() - self.event_day_index
    }

    /// Stable content hash used to tie fitted models to the exact panel they
    /// were fitted on.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(self.target.start_date.to_string().as_bytes());
        bytes.extend_from_slice(&(self.event_day_index as u64).to_le_bytes());
        let mut push_series = |s: &DailySeries, bytes: &mut Vec<u8>| {
            bytes.extend_from_slice(s.id.as_bytes());
            bytes.push(0);
            for v in &s.values {
                bytes.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        };
        push_series(&self.target, &mut bytes);
        for c in &self.controls {
            push_series(c, &mut bytes);
        }
        crate::rng::fnv1a64(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn rejects_non_finite() {
        let err = DailySeries::new("x", day("2014-09-01"), vec![1.0, f64::NAN], SeriesUnit::Count);
        assert!(matches!(err, Err(SeriesError::NonFinite { index: 1, .. })));
    }

    #[test]
    fn measured_rejects_negative() {
        let err =
            DailySeries::new_measured("x", day("2014-09-01"), vec![1.0, -2.0], SeriesUnit::Count);
        assert!(matches!(err, Err(SeriesError::Negative { index: 1, .. })));
        // signed derived series are fine through the plain constructor
        assert!(DailySeries::new("d", day("2014-09-01"), vec![-1.0], SeriesUnit::Ratio).is_ok());
    }

    #[test]
    fn calendar_indexing_round_trips() {
        let cal = Calendar::from_range(day("2014-09-01"), day("2014-09-30")).unwrap();
        assert_eq!(cal.days, 30);
        assert_eq!(cal.index_of(day("2014-09-01")), Some(0));
        assert_eq!(cal.index_of(day("2014-09-30")), Some(29));
        assert_eq!(cal.index_of(day("2014-10-01")), None);
        assert_eq!(cal.date_at(14), day("2014-09-15"));
        assert_eq!(cal.end(), day("2014-09-30"));
    }

    #[test]
    fn calendar_rejects_reversed_range() {
        assert!(Calendar::from_range(day("2014-09-02"), day("2014-09-01")).is_err());
    }

    #[test]
    fn panel_requires_alignment_and_pre_period() {
        let t = DailySeries::new("t", day("2014-09-01"), vec![1.0; 60], SeriesUnit::Count).unwrap();
        let short =
            DailySeries::new("c", day("2014-09-01"), vec![1.0; 59], SeriesUnit::Count).unwrap();
        assert!(matches!(
            SeriesPanel::new(t.clone(), vec![short], 40),
            Err(SeriesError::Misaligned { .. })
        ));
        assert!(matches!(
            SeriesPanel::new(t.clone(), vec![], 10),
            Err(SeriesError::PreTooShort { .. })
        ));
        assert!(matches!(
            SeriesPanel::new(t.clone(), vec![], 60),
            Err(SeriesError::EventOutOfRange { .. })
        ));
        assert!(SeriesPanel::new(t, vec![], 40).is_ok());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let t = DailySeries::new("t", day("2014-09-01"), vec![1.0; 60], SeriesUnit::Count).unwrap();
        let p1 = SeriesPanel::new(t.clone(), vec![], 40).unwrap();
        let mut t2 = t.clone();
        t2.values[3] = 2.0;
        let p2 = SeriesPanel::new(t2, vec![], 40).unwrap();
        assert_eq!(p1.fingerprint(), SeriesPanel::new(t, vec![], 40).unwrap().fingerprint());
        assert_ne!(p1.fingerprint(), p2.fingerprint());
    }

    #[test]
    fn moving_average_truncates_at_edges() {
        let v = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let ma = moving_average(&v, 3);
        assert_eq!(ma[0], 1.5); // (1+2)/2
        assert_eq!(ma[2], 3.0);
        assert_eq!(ma[4], 4.5);
        assert_eq!(moving_average(&v, 1), v);
    }
}

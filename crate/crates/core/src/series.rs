//! Daily time series on a regular one-day grid.

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// A dense, regularly spaced daily series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySeries {
    pub start: NaiveDate,
    pub values: Vec<f64>,
    pub label: String,
}

impl DailySeries {
    pub fn new(start: NaiveDate, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(CoreError::Empty("daily series needs at least one value".into()));
        }
        Ok(DailySeries {
            start,
            values,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end(&self) -> NaiveDate {
        self.start + Duration::days(self.values.len() as i64 - 1)
    }

    pub fn date_at(&self, i: usize) -> NaiveDate {
        self.start + Duration::days(i as i64)
    }

    /// Value on `date`, if the date falls on the grid.
    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        let off = (date - self.start).num_days();
        if off < 0 {
            return None;
        }
        self.values.get(off as usize).copied()
    }

    pub fn iter_dated(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (self.date_at(i), v))
    }

    /// Sub-series covering `[from, to]` (inclusive, clipped to the grid).
    pub fn slice_dates(&self, from: NaiveDate, to: NaiveDate) -> Result<DailySeries> {
        let lo = (from - self.start).num_days().max(0) as usize;
        let hi = ((to - self.start).num_days() + 1).min(self.len() as i64);
        if hi <= lo as i64 {
            return Err(CoreError::Empty(format!(
                "no days of `{}` fall within {from}..={to}",
                self.label
            )));
        }
        DailySeries::new(
            self.date_at(lo),
            self.values[lo..hi as usize].to_vec(),
            self.label.clone(),
        )
    }

    pub fn to_gapped(&self) -> GappedSeries {
        GappedSeries {
            start: self.start,
            values: self.values.iter().copied().map(Some).collect(),
            label: self.label.clone(),
        }
    }
}

/// A daily series on a fixed grid where some days may be missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GappedSeries {
    pub start: NaiveDate,
    pub values: Vec<Option<f64>>,
    pub label: String,
}

impl GappedSeries {
    pub fn missing(start: NaiveDate, len: usize, label: impl Into<String>) -> Self {
        GappedSeries {
            start,
            values: vec![None; len],
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn date_at(&self, i: usize) -> NaiveDate {
        self.start + Duration::days(i as i64)
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        let off = (date - self.start).num_days();
        if off < 0 {
            return None;
        }
        self.values.get(off as usize).copied().flatten()
    }

    pub fn n_observed(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Index range from the first to the last observed day.
    pub fn observed_range(&self) -> Option<(usize, usize)> {
        let first = self.values.iter().position(Option::is_some)?;
        let last = self.values.iter().rposition(Option::is_some)?;
        Some((first, last))
    }

    /// Dense series over the observed span. Leading and trailing gaps are
    /// trimmed; an interior gap is an error.
    pub fn to_dense(&self) -> Result<DailySeries> {
        let (first, last) = self
            .observed_range()
            .ok_or_else(|| CoreError::Empty(format!("series `{}` has no values", self.label)))?;
        let values = self.values[first..=last]
            .iter()
            .map(|v| v.ok_or(CoreError::MissingValues))
            .collect::<Result<Vec<_>>>()?;
        DailySeries::new(self.date_at(first), values, self.label.clone())
    }
}

/// Overlapping observed window of two gapped series as a pair of dense
/// value vectors, starting on the returned date.
pub fn common_span(a: &GappedSeries, b: &GappedSeries) -> Result<(NaiveDate, Vec<f64>, Vec<f64>)> {
    let range = |s: &GappedSeries| {
        s.observed_range()
            .map(|(f, l)| (s.date_at(f), s.date_at(l)))
            .ok_or_else(|| CoreError::Empty(format!("series `{}` has no values", s.label)))
    };
    let (a0, a1) = range(a)?;
    let (b0, b1) = range(b)?;
    let from = a0.max(b0);
    let to = a1.min(b1);
    if to < from {
        return Err(CoreError::Empty(format!(
            "`{}` and `{}` do not overlap",
            a.label, b.label
        )));
    }
    let n = (to - from).num_days() as usize + 1;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let d = from + Duration::days(i as i64);
        xs.push(a.get(d).ok_or(CoreError::MissingValues)?);
        ys.push(b.get(d).ok_or(CoreError::MissingValues)?);
    }
    Ok((from, xs, ys))
}

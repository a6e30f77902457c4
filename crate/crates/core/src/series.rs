//! Piecewise-constant time series with last-observation-carried-forward
//! semantics, shared by load traces, PV traces and audit traces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series is empty")]
    Empty,
    #[error("timestamps must strictly increase (at index {0})")]
    NotIncreasing(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("end time {end} precedes last timestamp {last}")]
    BadEnd { end: f64, last: f64 },
    #[error("time {0} outside series coverage")]
    OutOfRange(f64),
}

/// Step series: `values[i]` holds on `[times[i], times[i+1])`, the last value
/// holds until `end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    end: f64,
}

impl StepSeries {
    pub fn new(points: Vec<(f64, f64)>, end: f64) -> Result<Self, SeriesError> {
        if points.is_empty() {
            return Err(SeriesError::Empty);
        }
        for (i, &(t, v)) in points.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(SeriesError::NonFinite(i));
            }
            if i > 0 && t <= points[i - 1].0 {
                return Err(SeriesError::NotIncreasing(i));
            }
        }
        let last = points[points.len() - 1].0;
        if !(end >= last) {
            return Err(SeriesError::BadEnd { end, last });
        }
        let (times, values) = points.into_iter().unzip();
        Ok(StepSeries { times, values, end })
    }

    /// Series whose final point only marks the end of the observation.
    pub fn from_points_with_terminal(points: Vec<(f64, f64)>) -> Result<Self, SeriesError> {
        let end = points.last().ok_or(SeriesError::Empty)?.0;
        if points.len() == 1 {
            return StepSeries::new(points, end);
        }
        let mut points = points;
        let last = points.pop().unwrap();
        if last.0 <= points[points.len() - 1].0 {
            return Err(SeriesError::NotIncreasing(points.len()));
        }
        StepSeries::new(points, last.0)
    }

    pub fn constant(value: f64, start: f64, end: f64) -> Result<Self, SeriesError> {
        StepSeries::new(vec![(start, value)], end)
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Held value at `t`, or `None` outside `[start, end)`. A degenerate
    /// series with `start == end` answers at exactly `start`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let covered = (t >= self.start() && t < self.end) || (t == self.start() && self.start() == self.end);
        if !covered {
            return None;
        }
        Some(self.values[self.index_at(t)])
    }

    /// Held value at `t`, clamping times before the start to the first value
    /// and times at or after the end to the last value.
    pub fn value_clamped(&self, t: f64) -> f64 {
        if t < self.start() {
            return self.values[0];
        }
        self.values[self.index_at(t)]
    }

    fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t).saturating_sub(1)
    }

    /// First change point strictly after `t`, if any before the end.
    pub fn next_change_after(&self, t: f64) -> Option<f64> {
        let i = self.times.partition_point(|&x| x <= t);
        self.times.get(i).copied().filter(|&x| x < self.end)
    }

    /// ∫ value dt over `[a, b] ∩ [start, end]`, in value·seconds.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let a = a.max(self.start());
        let b = b.min(self.end);
        if b <= a {
            return 0.0;
        }
        let mut total = 0.0;
        let mut i = self.index_at(a);
        let mut t = a;
        while t < b {
            let seg_end = self.times.get(i + 1).copied().unwrap_or(self.end).min(b);
            total += self.values[i] * (seg_end - t);
            t = seg_end;
            i += 1;
        }
        total
    }

    /// Minimum value that is held for a positive duration; for a degenerate
    /// single-instant series, its only value.
    pub fn min_held(&self) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..self.times.len() {
            let next = self.times.get(i + 1).copied().unwrap_or(self.end);
            if next > self.times[i] {
                min = min.min(self.values[i]);
            }
        }
        if min.is_infinite() {
            self.values[0]
        } else {
            min
        }
    }

    /// Pointwise sum of several series over the union of their coverage;
    /// each series contributes zero outside its own coverage.
    pub fn sum(series: &[StepSeries]) -> Result<StepSeries, SeriesError> {
        let first = series.first().ok_or(SeriesError::Empty)?;
        let start = series.iter().map(|s| s.start()).fold(first.start(), f64::min);
        let end = series.iter().map(|s| s.end()).fold(first.end(), f64::max);
        let mut breaks: Vec<f64> = series
            .iter()
            .flat_map(|s| s.times.iter().copied().chain(std::iter::once(s.end)))
            .filter(|&t| t < end)
            .collect();
        breaks.push(start);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let points = breaks
            .into_iter()
            .map(|t| (t, series.iter().map(|s| s.value_at(t).unwrap_or(0.0)).sum()))
            .collect();
        StepSeries::new(points, end)
    }
}

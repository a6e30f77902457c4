//! Per-outlet, per-time-slot running mean and variance of consumption.
//!
//! The day is cut into `slots_per_day` equal slots and every observation is
//! filed under the slot of its time of day, across all days.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizer::OutletId;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlotStatsError {
    #[error("negative or non-finite consumption {0} W")]
    Domain(f64),
    #[error("no observations for outlet {outlet} in slot {slot}")]
    ColdStart { outlet: OutletId, slot: usize },
    #[error("slots_per_day must be positive")]
    ZeroSlots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotGrid {
    pub slots_per_day: usize,
}

impl Default for SlotGrid {
    fn default() -> Self {
        SlotGrid { slots_per_day: 48 }
    }
}

impl SlotGrid {
    pub fn new(slots_per_day: usize) -> Result<Self, SlotStatsError> {
        if slots_per_day == 0 {
            return Err(SlotStatsError::ZeroSlots);
        }
        Ok(SlotGrid { slots_per_day })
    }

    pub fn slot_seconds(&self) -> f64 {
        SECONDS_PER_DAY / self.slots_per_day as f64
    }

    /// Slot index of a time; multi-day times wrap to their time of day.
    pub fn slot_of(&self, time: f64) -> usize {
        let tod = time.rem_euclid(SECONDS_PER_DAY);
        let idx = (tod / self.slot_seconds()).floor() as usize;
        idx.min(self.slots_per_day - 1)
    }
}

/// Welford accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunningStats {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
    pub max: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.max = if self.count == 1 { x } else { self.max.max(x) };
    }

    /// Population variance.
    pub fn variance(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.m2 / self.count as f64).max(0.0))
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = other.mean - self.mean;
        RunningStats {
            count: n,
            mean: self.mean + delta * nb / n as f64,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n as f64,
            max: self.max.max(other.max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    Variance,
    VarianceOverMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutletSlotStats {
    grid: SlotGrid,
    /// Indexed by outlet id, then slot.
    cells: Vec<Vec<RunningStats>>,
}

impl OutletSlotStats {
    pub fn new(grid: SlotGrid) -> Self {
        OutletSlotStats {
            grid,
            cells: Vec::new(),
        }
    }

    pub fn grid(&self) -> SlotGrid {
        self.grid
    }

    fn row_mut(&mut self, outlet: OutletId) -> &mut Vec<RunningStats> {
        let i = outlet.0 as usize;
        if self.cells.len() <= i {
            self.cells
                .resize_with(i + 1, || vec![RunningStats::default(); self.grid.slots_per_day]);
        }
        &mut self.cells[i]
    }

    pub fn record(&mut self, outlet: OutletId, time: f64, watts: f64) -> Result<(), SlotStatsError> {
        if !(watts >= 0.0) || !watts.is_finite() {
            return Err(SlotStatsError::Domain(watts));
        }
        let slot = self.grid.slot_of(time);
        self.row_mut(outlet)[slot].push(watts);
        Ok(())
    }

    pub fn cell(&self, outlet: OutletId, slot: usize) -> RunningStats {
        self.cells
            .get(outlet.0 as usize)
            .and_then(|r| r.get(slot))
            .copied()
            .unwrap_or_default()
    }

    /// Variance, or variance / mean with a zero mean mapped to 0.
    pub fn metric(&self, outlet: OutletId, slot: usize, kind: MetricKind) -> Result<f64, SlotStatsError> {
        let c = self.cell(outlet, slot);
        let var = c.variance().ok_or(SlotStatsError::ColdStart { outlet, slot })?;
        Ok(match kind {
            MetricKind::Variance => var,
            MetricKind::VarianceOverMean if c.mean == 0.0 => 0.0,
            MetricKind::VarianceOverMean => var / c.mean,
        })
    }

    /// Largest metric value over every slot with history for this outlet.
    pub fn historical_max(&self, outlet: OutletId, kind: MetricKind) -> Option<f64> {
        (0..self.grid.slots_per_day)
            .filter_map(|s| self.metric(outlet, s, kind).ok())
            .reduce(f64::max)
    }

    pub fn merge(&self, other: &OutletSlotStats) -> OutletSlotStats {
        assert_eq!(self.grid, other.grid, "merging stats on different slot grids");
        let n = self.cells.len().max(other.cells.len());
        let cells = (0..n)
            .map(|o| {
                (0..self.grid.slots_per_day)
                    .map(|s| {
                        let id = OutletId(o as u32);
                        self.cell(id, s).merge(&other.cell(id, s))
                    })
                    .collect()
            })
            .collect();
        OutletSlotStats { grid: self.grid, cells }
    }

    pub fn outlets(&self) -> impl Iterator<Item = OutletId> + '_ {
        (0..self.cells.len() as u32).map(OutletId)
    }

    /// `outlet,slot,count,mean_w,variance_w2`, skipping empty cells. `name`
    /// maps outlet ids to the labels written in the first column.
    pub fn write_csv<W: Write>(&self, mut w: W, name: impl Fn(OutletId) -> String) -> std::io::Result<()> {
        writeln!(w, "outlet,slot,count,mean_w,variance_w2")?;
        for o in self.outlets() {
            for s in 0..self.grid.slots_per_day {
                let c = self.cell(o, s);
                if let Some(var) = c.variance() {
                    writeln!(w, "{},{},{},{:.6},{:.6}", name(o), s, c.count, c.mean, var)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const O: OutletId = OutletId(0);

    #[test]
    fn slot_boundaries() {
        let g = SlotGrid::default();
        assert_eq!(g.slot_of(0.0), 0);
        assert_eq!(g.slot_of(1799.999), 0);
        assert_eq!(g.slot_of(1800.0), 1);
        assert_eq!(g.slot_of(86_399.0), 47);
        assert_eq!(g.slot_of(86_400.0 + 1800.0), 1);
        let odd = SlotGrid::new(7).unwrap();
        assert_eq!(odd.slot_of(86_399.999), 6);
        assert!(SlotGrid::new(0).is_err());
    }

    #[test]
    fn constant_and_two_point_slots() {
        let mut st = OutletSlotStats::new(SlotGrid::default());
        for _ in 0..3 {
            st.record(O, 10.0, 100.0).unwrap();
        }
        assert_eq!(st.cell(O, 0).mean, 100.0);
        assert_eq!(st.metric(O, 0, MetricKind::Variance).unwrap(), 0.0);
        let mut st = OutletSlotStats::new(SlotGrid::default());
        st.record(O, 0.0, 90.0).unwrap();
        st.record(O, 5.0, 110.0).unwrap();
        assert_eq!(st.cell(O, 0).mean, 100.0);
        assert_eq!(st.metric(O, 0, MetricKind::Variance).unwrap(), 100.0);
        assert_eq!(st.metric(O, 0, MetricKind::VarianceOverMean).unwrap(), 1.0);
    }

    #[test]
    fn distinct_slots_and_errors() {
        let mut st = OutletSlotStats::new(SlotGrid::default());
        st.record(O, 600.0, 1.0).unwrap();
        st.record(O, 2400.0, 1.0).unwrap();
        assert_eq!(st.cell(O, 0).count, 1);
        assert_eq!(st.cell(O, 1).count, 1);
        assert_eq!(st.record(O, 0.0, -1.0), Err(SlotStatsError::Domain(-1.0)));
        assert_eq!(
            st.metric(O, 5, MetricKind::Variance),
            Err(SlotStatsError::ColdStart { outlet: O, slot: 5 })
        );
        assert!(st.metric(OutletId(9), 0, MetricKind::Variance).is_err());
    }

    #[test]
    fn ratio_and_dead_outlet() {
        let mut st = OutletSlotStats::new(SlotGrid::default());
        // mean 100, variance 400
        st.record(O, 0.0, 80.0).unwrap();
        st.record(O, 0.0, 120.0).unwrap();
        assert_eq!(st.metric(O, 0, MetricKind::VarianceOverMean).unwrap(), 4.0);
        st.record(OutletId(1), 0.0, 0.0).unwrap();
        assert_eq!(st.metric(OutletId(1), 0, MetricKind::VarianceOverMean).unwrap(), 0.0);
        assert_eq!(st.historical_max(O, MetricKind::Variance), Some(400.0));
        assert_eq!(st.historical_max(OutletId(7), MetricKind::Variance), None);
    }

    #[test]
    fn csv_export() {
        let mut st = OutletSlotStats::new(SlotGrid::new(2).unwrap());
        st.record(O, 0.0, 90.0).unwrap();
        st.record(O, 0.0, 110.0).unwrap();
        let mut buf = Vec::new();
        st.write_csv(&mut buf, |o| format!("o{}", o.0)).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "outlet,slot,count,mean_w,variance_w2\no0,0,2,100.000000,100.000000\n"
        );
    }

    fn two_pass(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    proptest! {
        #[test]
        fn matches_two_pass(xs in prop::collection::vec(0.0f64..2000.0, 1..200)) {
            let mut st = OutletSlotStats::new(SlotGrid::default());
            for x in &xs { st.record(O, 100.0, *x).unwrap(); }
            let (mean, var) = two_pass(&xs);
            let c = st.cell(O, 0);
            prop_assert!(close(c.mean, mean));
            prop_assert!(close(c.variance().unwrap(), var));
        }

        #[test]
        fn permutation_invariant(xs in prop::collection::vec(0.0f64..2000.0, 1..100), seed in any::<u64>()) {
            let mut shuffled = xs.clone();
            let n = shuffled.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let mut a = OutletSlotStats::new(SlotGrid::default());
            let mut b = OutletSlotStats::new(SlotGrid::default());
            for x in &xs { a.record(O, 0.0, *x).unwrap(); }
            for x in &shuffled { b.record(O, 0.0, *x).unwrap(); }
            prop_assert!(close(a.cell(O, 0).mean, b.cell(O, 0).mean));
            prop_assert!(close(a.cell(O, 0).variance().unwrap(), b.cell(O, 0).variance().unwrap()));
        }

        #[test]
        fn merge_equals_union(xs in prop::collection::vec((0u32..3, 0.0f64..86400.0, 0.0f64..500.0), 0..60),
                              ys in prop::collection::vec((0u32..3, 0.0f64..86400.0, 0.0f64..500.0), 0..60)) {
            let grid = SlotGrid::new(4).unwrap();
            let mut a = OutletSlotStats::new(grid);
            let mut b = OutletSlotStats::new(grid);
            let mut all = OutletSlotStats::new(grid);
            for &(o, t, w) in &xs { a.record(OutletId(o), t, w).unwrap(); all.record(OutletId(o), t, w).unwrap(); }
            for &(o, t, w) in &ys { b.record(OutletId(o), t, w).unwrap(); all.record(OutletId(o), t, w).unwrap(); }
            let m = a.merge(&b);
            for o in 0..3u32 {
                for s in 0..4 {
                    // oracle: two-pass over the raw union
                    let raw: Vec<f64> = xs.iter().chain(ys.iter())
                        .filter(|&&(oo, t, _)| oo == o && grid.slot_of(t) == s)
                        .map(|&(_, _, w)| w).collect();
                    let c = m.cell(OutletId(o), s);
                    prop_assert_eq!(c.count as usize, raw.len());
                    if !raw.is_empty() {
                        let (mean, var) = two_pass(&raw);
                        prop_assert!(close(c.mean, mean));
                        prop_assert!(close(c.variance().unwrap(), var));
                    }
                }
            }
        }
    }
}

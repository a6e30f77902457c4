//! Office consumption analytics: baseline, closing-hours average, weekly
//! energy and cost, and how far closing-hours draw could drop if
//! interruptible lines were switched off.
//!
//! Time 0 is Monday 00:00.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::gateway::DeviceRegistry;
use crate::series::{SeriesError, StepSeries};
use crate::slotstats::SECONDS_PER_DAY;

/// Per kWh.
pub const DEFAULT_TARIFF: f64 = 0.20;

pub const WEEKDAYS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("schedule line {line}: {reason}")]
    Schedule { line: usize, reason: String },
    #[error("no closed time overlaps the trace")]
    NoClosingOverlap,
    #[error("no lines to audit")]
    NoLines,
    #[error("line {0:?} is not in the registry")]
    Unregistered(String),
    #[error("invalid tariff {0}")]
    Tariff(f64),
    #[error("trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Opening hours per weekday; a weekday without hours is closed all day.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClosingSchedule {
    open: [Option<(f64, f64)>; 7],
}

fn parse_weekday(s: &str) -> Option<usize> {
    let s = s.trim().to_ascii_lowercase();
    if let Ok(n) = s.parse::<usize>() {
        return (n < 7).then_some(n);
    }
    WEEKDAYS.iter().position(|d| s.starts_with(d))
}

impl ClosingSchedule {
    /// Closed every day.
    pub fn always_closed() -> Self {
        ClosingSchedule::default()
    }

    /// Open `[open_h, close_h)` on `weekday` (0 = Monday).
    pub fn with_hours(mut self, weekday: usize, open_h: f64, close_h: f64) -> Self {
        self.open[weekday] = Some((open_h, close_h));
        self
    }

    /// Same hours Monday to Friday, weekends closed.
    pub fn office(open_h: f64, close_h: f64) -> Self {
        (0..5).fold(ClosingSchedule::default(), |s, d| s.with_hours(d, open_h, close_h))
    }

    pub fn hours(&self, weekday: usize) -> Option<(f64, f64)> {
        self.open[weekday]
    }

    /// Reads `weekday,open_hour,close_hour` lines. Weekdays are `0..6` or
    /// names (`mon`, `Tuesday`...); `#` starts a comment.
    pub fn read_from<R: BufRead>(reader: R) -> Result<Self, AuditError> {
        let mut s = ClosingSchedule::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let text = line.split('#').next().unwrap_or("").trim();
            if text.is_empty() || text.starts_with("weekday") {
                continue;
            }
            let err = |reason: &str| AuditError::Schedule {
                line: i + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = text.split(',').map(str::trim).collect();
            let [day, open, close] = fields[..] else {
                return Err(err("expected weekday,open_hour,close_hour"));
            };
            let d = parse_weekday(day).ok_or_else(|| err("unknown weekday"))?;
            let hour = |x: &str| x.parse::<f64>().map_err(|_| err("bad hour"));
            let (o, c) = (hour(open)?, hour(close)?);
            if !(0.0..=24.0).contains(&o) || !(0.0..=24.0).contains(&c) || o > c {
                return Err(err("hours must satisfy 0 <= open <= close <= 24"));
            }
            if s.open[d].is_some() {
                return Err(err("weekday listed twice"));
            }
            s.open[d] = Some((o, c));
        }
        Ok(s)
    }

    /// Closed intervals intersecting `[t0, t1)`, clipped to it.
    pub fn closed_intervals(&self, t0: f64, t1: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        if t1 <= t0 {
            return out;
        }
        let first = (t0 / SECONDS_PER_DAY).floor() as i64;
        let last = (t1 / SECONDS_PER_DAY).ceil() as i64;
        for day in first..last {
            let base = day as f64 * SECONDS_PER_DAY;
            let wd = day.rem_euclid(7) as usize;
            let raw: Vec<(f64, f64)> = match self.open[wd] {
                None => vec![(0.0, 24.0)],
                Some((o, c)) => vec![(0.0, o), (c, 24.0)],
            };
            for (a, b) in raw {
                let (a, b) = ((base + a * 3600.0).max(t0), (base + b * 3600.0).min(t1));
                if b > a {
                    match out.last_mut() {
                        Some((_, end)) if *end == a => *end = b,
                        _ => out.push((a, b)),
                    }
                }
            }
        }
        out
    }
}

/// Minimum value held over the observation.
pub fn baseline(trace: &StepSeries) -> f64 {
    trace.min_held()
}

/// Time-weighted mean over the closed part of the trace's coverage.
pub fn closing_hours_average(trace: &StepSeries, schedule: &ClosingSchedule) -> Result<f64, AuditError> {
    let intervals = schedule.closed_intervals(trace.start(), trace.end());
    let span: f64 = intervals.iter().map(|(a, b)| b - a).sum();
    if span <= 0.0 {
        return Err(AuditError::NoClosingOverlap);
    }
    let energy: f64 = intervals.iter().map(|&(a, b)| trace.integral(a, b)).sum();
    Ok(energy / span)
}

/// Time-weighted mean over the whole coverage.
pub fn overall_average(trace: &StepSeries) -> f64 {
    let span = trace.end() - trace.start();
    if span > 0.0 {
        trace.integral(trace.start(), trace.end()) / span
    } else {
        trace.values()[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayEnergy {
    /// Days since time 0.
    pub day: i64,
    pub weekday: usize,
    pub kwh: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeeklyProfile {
    pub days: Vec<DayEnergy>,
    pub tariff: f64,
    /// Mean weekend day over mean working day, when both exist.
    pub weekend_ratio: Option<f64>,
}

/// Energy and cost per calendar day touched by the trace.
pub fn weekly_profile(trace: &StepSeries, tariff: f64) -> Result<WeeklyProfile, AuditError> {
    if !(tariff >= 0.0) || !tariff.is_finite() {
        return Err(AuditError::Tariff(tariff));
    }
    let first = (trace.start() / SECONDS_PER_DAY).floor() as i64;
    let last = ((trace.end() / SECONDS_PER_DAY).ceil() as i64).max(first + 1);
    let days: Vec<DayEnergy> = (first..last)
        .map(|day| {
            let a = day as f64 * SECONDS_PER_DAY;
            let kwh = trace.integral(a, a + SECONDS_PER_DAY) / 3600.0 / 1000.0;
            DayEnergy {
                day,
                weekday: day.rem_euclid(7) as usize,
                kwh,
                cost: kwh * tariff,
            }
        })
        .collect();
    let mean = |weekend: bool| {
        let v: Vec<f64> = days
            .iter()
            .filter(|d| (d.weekday >= 5) == weekend)
            .map(|d| d.kwh)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let weekend_ratio = match (mean(true), mean(false)) {
        (Some(we), Some(wd)) if wd > 0.0 => Some(we / wd),
        _ => None,
    };
    Ok(WeeklyProfile {
        days,
        tariff,
        weekend_ratio,
    })
}

/// One monitored line.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditLine {
    pub name: String,
    pub interruptible: bool,
    pub trace: StepSeries,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reduction {
    pub closing_avg_w: f64,
    pub reducible_to_w: f64,
    pub interruptible_share: f64,
}

/// Closing-hours draw that would remain with every interruptible line off.
pub fn reduction_potential(lines: &[AuditLine], schedule: &ClosingSchedule) -> Result<Reduction, AuditError> {
    if lines.is_empty() {
        return Err(AuditError::NoLines);
    }
    let all: Vec<StepSeries> = lines.iter().map(|l| l.trace.clone()).collect();
    let total = StepSeries::sum(&all)?;
    let closing_avg_w = closing_hours_average(&total, schedule)?;
    let intervals = schedule.closed_intervals(total.start(), total.end());
    let span: f64 = intervals.iter().map(|(a, b)| b - a).sum();
    let kept: f64 = lines
        .iter()
        .filter(|l| !l.interruptible)
        .map(|l| intervals.iter().map(|&(a, b)| l.trace.integral(a, b)).sum::<f64>())
        .sum();
    let reducible_to_w = kept / span;
    let interruptible_share = if closing_avg_w > 0.0 {
        1.0 - reducible_to_w / closing_avg_w
    } else {
        0.0
    };
    Ok(Reduction {
        closing_avg_w,
        reducible_to_w,
        interruptible_share,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSummary {
    pub name: String,
    pub interruptible: bool,
    pub baseline_w: f64,
    pub closing_avg_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub profile: WeeklyProfile,
    pub baseline_w: f64,
    pub closing_avg_w: f64,
    pub reducible_to_w: f64,
    pub interruptible_share: f64,
    pub lines: Vec<LineSummary>,
}

/// Full audit of the summed lines.
pub fn audit(lines: &[AuditLine], schedule: &ClosingSchedule, tariff: f64) -> Result<AuditReport, AuditError> {
    if lines.is_empty() {
        return Err(AuditError::NoLines);
    }
    let all: Vec<StepSeries> = lines.iter().map(|l| l.trace.clone()).collect();
    let total = StepSeries::sum(&all)?;
    let reduction = reduction_potential(lines, schedule)?;
    let summaries = lines
        .iter()
        .map(|l| {
            Ok(LineSummary {
                name: l.name.clone(),
                interruptible: l.interruptible,
                baseline_w: baseline(&l.trace),
                closing_avg_w: closing_hours_average(&l.trace, schedule)?,
            })
        })
        .collect::<Result<Vec<_>, AuditError>>()?;
    Ok(AuditReport {
        profile: weekly_profile(&total, tariff)?,
        baseline_w: baseline(&total),
        closing_avg_w: reduction.closing_avg_w,
        reducible_to_w: reduction.reducible_to_w,
        interruptible_share: reduction.interruptible_share,
        lines: summaries,
    })
}

/// Reads a gateway history CSV (active power per channel) or an outlet trace
/// CSV into per-line series. History lines hold their last value until the
/// last timestamp in the file; outlet traces carry their own closing row.
pub fn read_lines_csv<R: Read>(reader: R) -> Result<Vec<(String, StepSeries)>, AuditError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| AuditError::Trace(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (name_col, watts_col, history) = match (col("outlet_id"), col("watts"), col("channel"), col("active_w")) {
        (Some(n), Some(w), _, _) => (n, w, false),
        (_, _, Some(n), Some(w)) => (n, w, true),
        _ => return Err(AuditError::Trace(format!("unrecognized trace header {headers:?}"))),
    };
    let time_col = col("time_s").ok_or_else(|| AuditError::Trace("missing time_s column".into()))?;
    let mut order = Vec::new();
    let mut points: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut last_time = f64::NEG_INFINITY;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| AuditError::Trace(e.to_string()))?;
        let num = |k: usize| {
            rec.get(k)
                .and_then(|x| x.parse::<f64>().ok())
                .ok_or_else(|| AuditError::Trace(format!("row {}: bad number in column {}", i + 2, k + 1)))
        };
        let (t, w) = (num(time_col)?, num(watts_col)?);
        last_time = last_time.max(t);
        let name = rec.get(name_col).unwrap_or("").to_string();
        if !points.contains_key(&name) {
            order.push(name.clone());
        }
        points.entry(name).or_default().push((t, w));
    }
    order
        .into_iter()
        .map(|name| {
            let pts = points.remove(&name).unwrap();
            let series = if history {
                StepSeries::new(pts, last_time)
            } else {
                StepSeries::from_points_with_terminal(pts)
            }
            .map_err(|e| AuditError::Trace(format!("line {name:?}: {e}")))?;
            Ok((name, series))
        })
        .collect()
}

/// Loads every `.csv` under `path` (or `path` itself) and flags each line
/// from the registry.
pub fn load_lines(path: &Path, registry: &DeviceRegistry) -> Result<Vec<AuditLine>, AuditError> {
    let files = if path.is_dir() {
        let mut v: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    let mut lines = Vec::new();
    for f in files {
        for (name, trace) in read_lines_csv(std::fs::File::open(&f)?)? {
            let entry = registry
                .get(&name)
                .ok_or_else(|| AuditError::Unregistered(name.clone()))?;
            lines.push(AuditLine {
                interruptible: entry.interruptible,
                name,
                trace,
            });
        }
    }
    if lines.is_empty() {
        return Err(AuditError::NoLines);
    }
    Ok(lines)
}

pub fn write_days_csv<W: Write>(p: &WeeklyProfile, mut w: W) -> std::io::Result<()> {
    writeln!(w, "day,weekday,kwh,cost")?;
    for d in &p.days {
        writeln!(w, "{},{},{:.6},{:.6}", d.day, WEEKDAYS[d.weekday], d.kwh, d.cost)?;
    }
    Ok(())
}

pub fn write_lines_csv<W: Write>(r: &AuditReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "line,interruptible,baseline_w,closing_avg_w")?;
    for l in &r.lines {
        writeln!(
            w,
            "{},{},{:.3},{:.3}",
            l.name, l.interruptible as u8, l.baseline_w, l.closing_avg_w
        )?;
    }
    Ok(())
}

pub fn write_summary<W: Write>(r: &AuditReport, mut w: W) -> std::io::Result<()> {
    let kwh: f64 = r.profile.days.iter().map(|d| d.kwh).sum();
    let cost: f64 = r.profile.days.iter().map(|d| d.cost).sum();
    writeln!(w, "lines                     {}", r.lines.len())?;
    writeln!(w, "days                      {}", r.profile.days.len())?;
    writeln!(w, "energy                    {kwh:.3} kWh")?;
    writeln!(
        w,
        "cost                      {cost:.2} at {:.4} per kWh",
        r.profile.tariff
    )?;
    match r.profile.weekend_ratio {
        Some(x) => writeln!(w, "weekend / working day     {x:.3}")?,
        None => writeln!(w, "weekend / working day     n/a")?,
    }
    writeln!(w, "baseline                  {:.1} W", r.baseline_w)?;
    writeln!(w, "closing-hours average     {:.1} W", r.closing_avg_w)?;
    writeln!(w, "reducible to              {:.1} W", r.reducible_to_w)?;
    writeln!(w, "interruptible share       {:.3}", r.interruptible_share)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DAY: f64 = SECONDS_PER_DAY;
    const H: f64 = 3600.0;

    fn constant(w: f64, days: f64) -> StepSeries {
        StepSeries::constant(w, 0.0, days * DAY).unwrap()
    }

    /// `closed_w` at night (before 8 h and from 18 h), `open_w` in between.
    fn office_day(closed_w: f64, open_w: f64, days: usize) -> StepSeries {
        let mut pts = Vec::new();
        for d in 0..days {
            let b = d as f64 * DAY;
            pts.push((b, closed_w));
            pts.push((b + 8.0 * H, open_w));
            pts.push((b + 18.0 * H, closed_w));
        }
        StepSeries::new(pts, days as f64 * DAY).unwrap()
    }

    #[test]
    fn schedule_parsing() {
        let s = ClosingSchedule::read_from(
            "# office\nweekday,open_hour,close_hour\nmon,8,18\n1,8,18\nWednesday, 9, 17\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(s.hours(0), Some((8.0, 18.0)));
        assert_eq!(s.hours(1), Some((8.0, 18.0)));
        assert_eq!(s.hours(2), Some((9.0, 17.0)));
        assert_eq!(s.hours(5), None);
        assert!(ClosingSchedule::read_from("mon,18,8\n".as_bytes()).is_err());
        assert!(ClosingSchedule::read_from("funday,8,18\n".as_bytes()).is_err());
        assert!(ClosingSchedule::read_from("mon,8\n".as_bytes()).is_err());
        assert!(ClosingSchedule::read_from("mon,8,18\nmon,9,17\n".as_bytes()).is_err());
    }

    #[test]
    fn closed_intervals_merge_across_midnight() {
        let s = ClosingSchedule::office(8.0, 18.0);
        let iv = s.closed_intervals(0.0, 2.0 * DAY);
        assert_eq!(
            iv,
            vec![(0.0, 8.0 * H), (18.0 * H, DAY + 8.0 * H), (DAY + 18.0 * H, 2.0 * DAY)]
        );
        // Saturday is closed all day and joins Friday evening and Sunday.
        let iv = s.closed_intervals(4.0 * DAY, 7.0 * DAY);
        assert_eq!(
            iv,
            vec![(4.0 * DAY, 4.0 * DAY + 8.0 * H), (4.0 * DAY + 18.0 * H, 7.0 * DAY)]
        );
    }

    #[test]
    fn table_one_plateaus() {
        let s = ClosingSchedule::office(8.0, 18.0);
        for (base, closing) in [(4341.0, 5552.0), (905.0, 2710.0), (620.0, 1017.0)] {
            // minimum plateau for an hour each night, closing mean preserved
            let mut pts = Vec::new();
            for d in 0..5 {
                let b = d as f64 * DAY;
                pts.push((b, 2.0 * closing - base));
                pts.push((b + 1.0 * H, base));
                pts.push((b + 2.0 * H, closing));
                pts.push((b + 8.0 * H, 3.0 * closing));
                pts.push((b + 18.0 * H, closing));
            }
            let tr = StepSeries::new(pts, 5.0 * DAY).unwrap();
            assert_eq!(baseline(&tr), base);
            assert!((closing_hours_average(&tr, &s).unwrap() - closing).abs() < 1e-9);
        }
    }

    #[test]
    fn closing_average_examples() {
        let s = ClosingSchedule::office(8.0, 18.0);
        assert!((closing_hours_average(&constant(1017.0, 3.0), &s).unwrap() - 1017.0).abs() < 1e-9);
        let tr = office_day(1000.0, 5000.0, 5);
        assert!((closing_hours_average(&tr, &s).unwrap() - 1000.0).abs() < 1e-9);
        let open_all = (0..7).fold(ClosingSchedule::default(), |s, d| s.with_hours(d, 0.0, 24.0));
        assert!(matches!(
            closing_hours_average(&tr, &open_all),
            Err(AuditError::NoClosingOverlap)
        ));
    }

    #[test]
    fn baseline_trivia() {
        assert_eq!(baseline(&constant(42.0, 1.0)), 42.0);
        assert_eq!(baseline(&StepSeries::new(vec![(5.0, 7.0)], 5.0).unwrap()), 7.0);
    }

    #[test]
    fn weekly_profile_examples() {
        let p = weekly_profile(&constant(1000.0, 1.0), DEFAULT_TARIFF).unwrap();
        assert_eq!(p.days.len(), 1);
        assert!((p.days[0].kwh - 24.0).abs() < 1e-12);
        assert!((p.days[0].cost - 4.80).abs() < 1e-12);
        let zero = weekly_profile(&constant(0.0, 2.0), DEFAULT_TARIFF).unwrap();
        assert!(zero.days.iter().all(|d| d.kwh == 0.0));
        let mut pts = Vec::new();
        for d in 0..7 {
            pts.push((d as f64 * DAY, if d >= 5 { 250.0 } else { 1000.0 }));
        }
        let week = StepSeries::new(pts, 7.0 * DAY).unwrap();
        let p = weekly_profile(&week, DEFAULT_TARIFF).unwrap();
        assert!((p.weekend_ratio.unwrap() - 0.25).abs() < 1e-12);
        assert!(weekly_profile(&week, -1.0).is_err());
    }

    fn line(name: &str, w: f64, interruptible: bool) -> AuditLine {
        AuditLine {
            name: name.into(),
            interruptible,
            trace: constant(w, 2.0),
        }
    }

    #[test]
    fn reduction_examples() {
        let s = ClosingSchedule::office(8.0, 18.0);
        let r = reduction_potential(&[line("lights", 4000.0, true), line("servers", 1000.0, false)], &s).unwrap();
        assert!((r.reducible_to_w - 1000.0).abs() < 1e-9);
        assert!((r.interruptible_share - 0.8).abs() < 1e-9);
        let r = reduction_potential(&[line("a", 4000.0, false), line("b", 1000.0, false)], &s).unwrap();
        assert!((r.reducible_to_w - r.closing_avg_w).abs() < 1e-9);
        assert!(r.interruptible_share.abs() < 1e-12);
        let r = reduction_potential(&[line("a", 4000.0, true), line("b", 1000.0, true)], &s).unwrap();
        assert_eq!(r.reducible_to_w, 0.0);
        assert!((r.interruptible_share - 1.0).abs() < 1e-12);
        assert!(matches!(reduction_potential(&[], &s), Err(AuditError::NoLines)));
    }

    #[test]
    fn reads_both_csv_shapes() {
        let outlet = "time_s,outlet_id,watts\n0,a,10\n60,a,20\n120,a,20\n0,b,5\n120,b,5\n";
        let lines = read_lines_csv(outlet.as_bytes()).unwrap();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].1.integral(0.0, 120.0), 1800.0);
        let hist = "time_s,channel,apparent_va,power_factor,current_a,active_w,reactive_var\n\
                    0,desk,100,1,0.43,100,0\n30,desk,50,1,0.21,50,0\n90,lamp,10,1,0.04,10,0\n";
        let lines = read_lines_csv(hist.as_bytes()).unwrap();
        assert_eq!(lines[0].0, "desk");
        assert_eq!(lines[0].1.end(), 90.0);
        assert_eq!(lines[0].1.integral(0.0, 90.0), 100.0 * 30.0 + 50.0 * 60.0);
        assert!(read_lines_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    fn arb_trace() -> impl Strategy<Value = StepSeries> {
        prop::collection::vec((1u32..20_000, 0.0f64..5000.0), 1..40).prop_map(|steps| {
            let mut t = 0.0;
            let pts = steps
                .into_iter()
                .map(|(dt, w)| {
                    let p = (t, w);
                    t += dt as f64;
                    p
                })
                .collect();
            StepSeries::new(pts, t).unwrap()
        })
    }

    proptest! {
        #[test]
        fn baseline_at_most_closing_average(tr in arb_trace()) {
            let s = ClosingSchedule::office(8.0, 18.0);
            if let Ok(avg) = closing_hours_average(&tr, &s) {
                prop_assert!(baseline(&tr) <= avg + 1e-9);
            }
            prop_assert!(baseline(&tr) <= overall_average(&tr) + 1e-9);
        }

        #[test]
        fn daily_energy_is_additive(tr in arb_trace(), cut_day in 0u32..3) {
            let cut = cut_day as f64 * DAY;
            prop_assume!(cut > tr.start() && cut < tr.end());
            let pts: Vec<_> = tr.points().collect();
            let left: Vec<_> = pts.iter().copied().filter(|p| p.0 < cut).collect();
            let mut right: Vec<_> = vec![(cut, tr.value_at(cut).unwrap())];
            right.extend(pts.iter().copied().filter(|p| p.0 > cut));
            let a = StepSeries::new(left, cut).unwrap();
            let b = StepSeries::new(right, tr.end()).unwrap();
            let total = |p: WeeklyProfile| p.days.iter().map(|d| d.kwh).sum::<f64>();
            let whole = total(weekly_profile(&tr, 0.2).unwrap());
            let split = total(weekly_profile(&a, 0.2).unwrap()) + total(weekly_profile(&b, 0.2).unwrap());
            prop_assert!((whole - split).abs() < 1e-9);
        }

        #[test]
        fn flagging_more_never_raises_reducible(ws in prop::collection::vec(0.0f64..3000.0, 1..6), flags in any::<u8>(), extra in 0usize..6) {
            let s = ClosingSchedule::office(8.0, 18.0);
            let lines: Vec<AuditLine> = ws.iter().enumerate()
                .map(|(k, &w)| line(&k.to_string(), w, flags >> k & 1 == 1))
                .collect();
            let before = reduction_potential(&lines, &s).unwrap().reducible_to_w;
            let mut more = lines.clone();
            let k = extra % more.len();
            more[k].interruptible = true;
            let after = reduction_potential(&more, &s).unwrap().reducible_to_w;
            prop_assert!(after <= before + 1e-9);
        }
    }
}

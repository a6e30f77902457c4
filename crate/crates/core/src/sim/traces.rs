//! Synthetic load and PV traces, and their CSV forms.
//!
//! Outlet traces: `time_s,outlet_id,watts`, one row per change point plus a
//! closing row at the end of coverage. PV traces: `time_s,dc_watts`, same
//! convention.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::series::StepSeries;
use crate::slotstats::SECONDS_PER_DAY;

/// Outlet behaviour families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "archetype", rename_all = "snake_case")]
pub enum Archetype {
    /// Compressor duty cycle: `on_w` for `duty·period`, then off, with each
    /// phase length jittered by up to ±`jitter` of itself.
    Fridge {
        on_w: f64,
        period_s: f64,
        duty: f64,
        #[serde(default)]
        jitter: f64,
    },
    /// Constant draw inside a daily window. The window edges move by up to
    /// ±`jitter_s` each day and the load skips a day with probability
    /// `1 − day_probability`. While on, `noise_w` of extra uniform draw is
    /// resampled every `noise_step_s`.
    Resistive {
        watts: f64,
        on_h: f64,
        off_h: f64,
        #[serde(default)]
        jitter_s: f64,
        #[serde(default = "one")]
        day_probability: f64,
        #[serde(default)]
        noise_w: f64,
        #[serde(default = "sixty")]
        noise_step_s: f64,
    },
    /// Constant baseline with occasional spikes: every `step_s` a spike of
    /// `spike_w` extra watts lasting `spike_len_s` starts with probability
    /// `spike_prob`, only inside the optional `[from_h, to_h)` window.
    Spiky {
        base_w: f64,
        spike_w: f64,
        spike_prob: f64,
        step_s: f64,
        spike_len_s: f64,
        #[serde(default)]
        window_h: Option<[f64; 2]>,
    },
}

fn one() -> f64 {
    1.0
}

fn sixty() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutletSpec {
    pub name: String,
    #[serde(flatten)]
    pub archetype: Archetype,
}

/// Clear-sky half-sine between sunrise and sunset with random cloud dips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvSpec {
    pub peak_dc_w: f64,
    #[serde(default = "sunrise")]
    pub sunrise_h: f64,
    #[serde(default = "sunset")]
    pub sunset_h: f64,
    #[serde(default = "sixty")]
    pub step_s: f64,
    /// Per-step probability that a cloud starts.
    #[serde(default)]
    pub cloud_prob: f64,
    /// Fraction of output removed under a cloud.
    #[serde(default)]
    pub cloud_depth: f64,
    #[serde(default = "sixty")]
    pub cloud_len_s: f64,
    /// Uniform relative noise applied to every step.
    #[serde(default)]
    pub noise: f64,
}

fn sunrise() -> f64 {
    6.5
}

fn sunset() -> f64 {
    19.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub days: u32,
    pub outlets: Vec<OutletSpec>,
    pub pv: PvSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTrace {
    pub name: String,
    pub series: StepSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub outlets: Vec<NamedTrace>,
    pub pv: StepSeries,
}

/// Generates traces from a spec and writes `outlets.csv` and `pv.csv` into
/// `dir`.
pub fn generate_traces(spec: &TraceSpec, seed: u64, dir: &std::path::Path) -> Result<TraceSet, SimError> {
    let set = spec.generate(seed)?;
    std::fs::create_dir_all(dir)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("outlets.csv"))?);
    write_outlet_csv(&set.outlets, &mut out)?;
    out.flush()?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("pv.csv"))?);
    write_pv_csv(&set.pv, &mut out)?;
    out.flush()?;
    Ok(set)
}

impl TraceSpec {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let spec: TraceSpec = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.days == 0 {
            return bad("trace spec needs at least one day".into());
        }
        if self.outlets.is_empty() {
            return bad("trace spec lists no outlets".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.outlets {
            if !seen.insert(&o.name) {
                return bad(format!("duplicate outlet name {:?}", o.name));
            }
            if o.name.is_empty() || o.name.contains(',') {
                return bad(format!("invalid outlet name {:?}", o.name));
            }
            let ok = match o.archetype {
                Archetype::Fridge {
                    on_w,
                    period_s,
                    duty,
                    jitter,
                } => on_w >= 0.0 && period_s > 0.0 && duty > 0.0 && duty < 1.0 && (0.0..1.0).contains(&jitter),
                Archetype::Resistive {
                    watts,
                    on_h,
                    off_h,
                    jitter_s,
                    day_probability,
                    noise_w,
                    noise_step_s,
                } => {
                    watts >= 0.0
                        && (0.0..=24.0).contains(&on_h)
                        && (0.0..=24.0).contains(&off_h)
                        && on_h < off_h
                        && jitter_s >= 0.0
                        && (0.0..=1.0).contains(&day_probability)
                        && noise_w >= 0.0
                        && noise_step_s > 0.0
                }
                Archetype::Spiky {
                    base_w,
                    spike_w,
                    spike_prob,
                    step_s,
                    spike_len_s,
                    window_h,
                } => {
                    base_w >= 0.0
                        && spike_w >= 0.0
                        && (0.0..=1.0).contains(&spike_prob)
                        && step_s > 0.0
                        && spike_len_s > 0.0
                        && window_h.is_none_or(|[a, b]| a < b)
                }
            };
            if !ok {
                return bad(format!("invalid parameters for outlet {:?}", o.name));
            }
        }
        let pv = &self.pv;
        if !(pv.peak_dc_w >= 0.0
            && pv.sunrise_h < pv.sunset_h
            && pv.step_s > 0.0
            && (0.0..=1.0).contains(&pv.cloud_prob)
            && (0.0..=1.0).contains(&pv.cloud_depth)
            && pv.cloud_len_s > 0.0
            && (0.0..1.0).contains(&pv.noise))
        {
            return bad("invalid PV parameters".into());
        }
        Ok(())
    }

    pub fn horizon_s(&self) -> f64 {
        self.days as f64 * SECONDS_PER_DAY
    }

    /// Deterministic traces; each outlet and the PV draw from their own
    /// ChaCha stream so adding an outlet does not perturb the others.
    pub fn generate(&self, seed: u64) -> Result<TraceSet, SimError> {
        self.validate()?;
        let end = self.horizon_s();
        let outlets = self
            .outlets
            .iter()
            .enumerate()
            .map(|(k, o)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64 + 1);
                let mut points = match &o.archetype {
                    Archetype::Fridge { .. } => fridge(&o.archetype, end, &mut rng),
                    Archetype::Resistive { .. } => resistive(&o.archetype, self.days, &mut rng),
                    Archetype::Spiky { .. } => spiky(&o.archetype, end, &mut rng),
                };
                points.retain(|p| p.0 < end);
                Ok(NamedTrace {
                    name: o.name.clone(),
                    series: StepSeries::new(compress(points), end)?,
                })
            })
            .collect::<Result<Vec<_>, SimError>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        let pv = StepSeries::new(compress(pv_points(&self.pv, end, &mut rng)), end)?;
        Ok(TraceSet { outlets, pv })
    }
}

fn jittered(rng: &mut ChaCha8Rng, len: f64, jitter: f64) -> f64 {
    if jitter == 0.0 {
        return len;
    }
    len * (1.0 + rng.random_range(-jitter..=jitter))
}

fn fridge(a: &Archetype, end: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let Archetype::Fridge {
        on_w,
        period_s,
        duty,
        jitter,
    } = *a
    else {
        unreachable!()
    };
    let mut pts = Vec::new();
    // random phase so identical fridges do not switch in lockstep
    let mut t = -rng.random_range(0.0..period_s);
    let mut on = true;
    while t < end {
        let len = if on { duty * period_s } else { (1.0 - duty) * period_s };
        let next = t + jittered(rng, len, jitter).max(1.0);
        pts.push((t.max(0.0).round(), if on { on_w } else { 0.0 }));
        t = next;
        on = !on;
    }
    pts
}

fn resistive(a: &Archetype, days: u32, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let Archetype::Resistive {
        watts,
        on_h,
        off_h,
        jitter_s,
        day_probability,
        noise_w,
        noise_step_s,
    } = *a
    else {
        unreachable!()
    };
    let mut pts = vec![(0.0, 0.0)];
    for d in 0..days {
        let day0 = d as f64 * SECONDS_PER_DAY;
        let mut shift = || {
            if jitter_s > 0.0 {
                rng.random_range(-jitter_s..=jitter_s)
            } else {
                0.0
            }
        };
        let start = (on_h * 3600.0 + shift()).clamp(0.0, SECONDS_PER_DAY - 1.0).round();
        let stop = (off_h * 3600.0 + shift()).clamp(start + 1.0, SECONDS_PER_DAY).round();
        let active = rng.random::<f64>() < day_probability;
        if !active {
            continue;
        }
        let mut t = start;
        while t < stop {
            let extra = if noise_w > 0.0 {
                rng.random_range(0.0..=noise_w).round()
            } else {
                0.0
            };
            pts.push((day0 + t, watts + extra));
            t += noise_step_s;
        }
        pts.push((day0 + stop, 0.0));
    }
    pts
}

fn spiky(a: &Archetype, end: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let Archetype::Spiky {
        base_w,
        spike_w,
        spike_prob,
        step_s,
        spike_len_s,
        window_h,
    } = *a
    else {
        unreachable!()
    };
    let mut pts = vec![(0.0, base_w)];
    let mut t = 0.0;
    while t < end {
        let tod_h = (t % SECONDS_PER_DAY) / 3600.0;
        let in_window = window_h.is_none_or(|[a, b]| tod_h >= a && tod_h < b);
        // always draw so the stream does not depend on the window
        let hit = rng.random::<f64>() < spike_prob;
        if in_window && hit {
            let stop = (t + spike_len_s).min(end);
            pts.push((t.round(), base_w + spike_w));
            if stop < end {
                pts.push((stop.round(), base_w));
            }
            t = stop.max(t + step_s);
        } else {
            t += step_s;
        }
    }
    pts
}

fn pv_points(spec: &PvSpec, end: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    let (rise, set) = (spec.sunrise_h * 3600.0, spec.sunset_h * 3600.0);
    let mut cloud_until = f64::NEG_INFINITY;
    let mut t = 0.0;
    while t < end {
        let tod = t % SECONDS_PER_DAY;
        let cloud_hit = rng.random::<f64>() < spec.cloud_prob;
        let noise = if spec.noise > 0.0 {
            rng.random_range(-spec.noise..=spec.noise)
        } else {
            0.0
        };
        let mut w = if tod >= rise && tod < set {
            spec.peak_dc_w * (PI * (tod - rise) / (set - rise)).sin()
        } else {
            0.0
        };
        if w > 0.0 {
            if cloud_hit && t >= cloud_until {
                cloud_until = t + spec.cloud_len_s;
            }
            if t < cloud_until {
                w *= 1.0 - spec.cloud_depth;
            }
            w *= 1.0 + noise;
        }
        pts.push((t, w.max(0.0).round()));
        t += spec.step_s;
    }
    pts
}

/// Sorts, keeps the last value written at each instant and drops rows that
/// repeat the previous value.
fn compress(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for (t, v) in pts {
        match out.last_mut() {
            Some(last) if last.0 == t => last.1 = v,
            _ => out.push((t, v)),
        }
    }
    // collapse equal-time overwrites that now repeat the previous value
    let mut dedup: Vec<(f64, f64)> = Vec::with_capacity(out.len());
    for p in out {
        if dedup.last().is_none_or(|l| l.1 != p.1) {
            dedup.push(p);
        }
    }
    if dedup.first().is_some_and(|p| p.0 > 0.0) {
        dedup.insert(0, (0.0, 0.0));
    }
    dedup
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

pub fn write_outlet_csv<W: Write>(traces: &[NamedTrace], mut w: W) -> std::io::Result<()> {
    writeln!(w, "time_s,outlet_id,watts")?;
    for tr in traces {
        let mut last = 0.0;
        for (t, v) in tr.series.points() {
            writeln!(w, "{},{},{}", fmt_num(t), tr.name, fmt_num(v))?;
            last = v;
        }
        writeln!(w, "{},{},{}", fmt_num(tr.series.end()), tr.name, fmt_num(last))?;
    }
    Ok(())
}

pub fn write_pv_csv<W: Write>(pv: &StepSeries, mut w: W) -> std::io::Result<()> {
    writeln!(w, "time_s,dc_watts")?;
    let mut last = 0.0;
    for (t, v) in pv.points() {
        writeln!(w, "{},{}", fmt_num(t), fmt_num(v))?;
        last = v;
    }
    writeln!(w, "{},{}", fmt_num(pv.end()), fmt_num(last))
}

/// Reads an outlet trace CSV; outlets keep their order of first appearance.
pub fn read_outlet_csv<R: Read>(reader: R) -> Result<Vec<NamedTrace>, SimError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| SimError::Trace(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time_s", "outlet_id", "watts"] {
        return Err(SimError::Trace(format!("unexpected outlet trace header {:?}", headers)));
    }
    let mut order = Vec::new();
    let mut points: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| SimError::Trace(e.to_string()))?;
        let num = |k: usize| {
            rec[k]
                .parse::<f64>()
                .map_err(|_| SimError::Trace(format!("row {}: bad number {:?}", i + 2, &rec[k])))
        };
        let (t, w) = (num(0)?, num(2)?);
        if w < 0.0 {
            return Err(SimError::Trace(format!("row {}: negative watts", i + 2)));
        }
        let name = rec[1].to_string();
        if !points.contains_key(&name) {
            order.push(name.clone());
        }
        points.entry(name).or_default().push((t, w));
    }
    order
        .into_iter()
        .map(|name| {
            let pts = points.remove(&name).unwrap();
            let series = StepSeries::from_points_with_terminal(pts)
                .map_err(|e| SimError::Trace(format!("outlet {name:?}: {e}")))?;
            Ok(NamedTrace { name, series })
        })
        .collect()
}

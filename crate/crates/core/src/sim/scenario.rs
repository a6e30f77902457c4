//! Scenario files.
//!
//! ```toml
//! [run]
//! duration_s = 86400
//! warmup_days = 7
//! seed = 7
//!
//! [inverter]
//! battery_capacity_wh = 0
//!
//! [delays]
//! l_r = 1.0
//!
//! [policy]
//! policy = "static_var"
//! threshold = 400
//! margin = 0.2
//!
//! [slots]
//! slots_per_day = 48
//!
//! [traces]
//! outlets = "outlets.csv"
//! pv = "pv.csv"
//! ```
//!
//! Instead of CSV paths, `[traces.generate]` may hold a trace spec inline;
//! the traces are then generated from the run seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::traces::{read_outlet_csv, NamedTrace, TraceSet, TraceSpec};
use super::SimError;
use crate::inverter::{read_pv_trace, InverterConfig};
use crate::meter::NotificationMode;
use crate::policy::PolicyKind;
use crate::slotstats::{SlotGrid, SECONDS_PER_DAY};

/// Meter read period, bus propagation and computation time, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayModel {
    pub l_r: f64,
    pub l_p: f64,
    pub l_e: f64,
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel {
            l_r: 1.0,
            l_p: 0.001,
            l_e: 0.01,
        }
    }
}

impl DelayModel {
    pub const ZERO: DelayModel = DelayModel {
        l_r: 0.0,
        l_p: 0.0,
        l_e: 0.0,
    };

    /// Age of the snapshot a decision sees.
    pub fn monitor(&self) -> f64 {
        self.l_r + self.l_p + self.l_e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Length of the measured period, after the warm-up days.
    pub duration_s: f64,
    pub warmup_days: u32,
    pub decision_period_s: f64,
    pub seed: u64,
    /// Time on grid after an energy lack.
    pub lack_cooldown_s: f64,
    /// How long PV demand may exceed production before it counts as a lack.
    pub overload_tolerance_s: f64,
    /// Spacing of the samples fed to the slot statistics.
    pub stats_period_s: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            duration_s: SECONDS_PER_DAY,
            warmup_days: 7,
            decision_period_s: 30.0,
            seed: 0,
            lack_cooldown_s: 60.0,
            overload_tolerance_s: 0.5,
            stats_period_s: 10.0,
        }
    }
}

impl RunConfig {
    /// Start of the measured period.
    pub fn start_s(&self) -> f64 {
        self.warmup_days as f64 * SECONDS_PER_DAY
    }

    pub fn end_s(&self) -> f64 {
        self.start_s() + self.duration_s
    }
}

/// How the emulated meters report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeterConfig {
    pub notify: NotificationMode,
    /// Power factor of every load.
    pub power_factor: f64,
}

impl Default for MeterConfig {
    fn default() -> Self {
        MeterConfig {
            notify: NotificationMode::AbsoluteDelta(5.0),
            power_factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceSource {
    Files {
        outlets: PathBuf,
        pv: PathBuf,
    },
    Generated(TraceSpec),
    /// Traces built in code.
    Inline,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub run: RunConfig,
    pub inverter: InverterConfig,
    pub delays: DelayModel,
    pub policy: PolicyKind,
    pub slots: SlotGrid,
    pub meters: MeterConfig,
    pub source: TraceSource,
    pub traces: TraceSet,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    run: RunConfig,
    #[serde(default)]
    inverter: InverterConfig,
    #[serde(default)]
    delays: DelayModel,
    policy: PolicySection,
    #[serde(default)]
    slots: SlotsSection,
    #[serde(default)]
    meters: MetersSection,
    traces: TracesSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicySection {
    policy: String,
    threshold: Option<f64>,
    margin: Option<f64>,
    margin_min: Option<f64>,
    margin_max: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SlotsSection {
    slots_per_day: usize,
}

impl Default for SlotsSection {
    fn default() -> Self {
        SlotsSection { slots_per_day: 48 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MetersSection {
    notify: String,
    param: f64,
    power_factor: f64,
}

impl Default for MetersSection {
    fn default() -> Self {
        MetersSection {
            notify: "absolute_delta".into(),
            param: 5.0,
            power_factor: 1.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TracesSection {
    outlets: Option<PathBuf>,
    pv: Option<PathBuf>,
    generate: Option<TraceSpec>,
}

fn policy_from(p: &PolicySection) -> Result<PolicyKind, SimError> {
    let threshold = || {
        p.threshold
            .ok_or_else(|| SimError::Config(format!("policy {:?} needs a threshold", p.policy)))
    };
    let margin = p.margin.unwrap_or(0.2);
    let (lo, hi) = (p.margin_min.unwrap_or(0.05), p.margin_max.unwrap_or(0.4));
    let kind = match p.policy.as_str() {
        "naive" => PolicyKind::Naive {
            margin: p.margin.unwrap_or(0.0),
        },
        "static_var" => PolicyKind::StaticVariance {
            threshold_w2: threshold()?,
            margin,
        },
        "static_var_mean" => PolicyKind::StaticVarianceMeanRatio {
            threshold_ratio: threshold()?,
            margin,
        },
        "adaptive_var" => PolicyKind::AdaptiveVariance {
            margin_min: lo,
            margin_max: hi,
        },
        "adaptive_var_mean" => PolicyKind::AdaptiveVarianceMeanRatio {
            margin_min: lo,
            margin_max: hi,
        },
        other => return Err(SimError::Config(format!("unknown policy {other:?}"))),
    };
    kind.validate()?;
    Ok(kind)
}

fn notify_from(m: &MetersSection) -> Result<NotificationMode, SimError> {
    let mode = match m.notify.as_str() {
        "interval" => NotificationMode::Interval(m.param),
        "absolute_delta" => NotificationMode::AbsoluteDelta(m.param),
        "percent_delta" => NotificationMode::PercentDelta(m.param),
        other => return Err(SimError::Config(format!("unknown notification mode {other:?}"))),
    };
    mode.validate()?;
    Ok(mode)
}

impl Scenario {
    /// Reads a scenario file. `seed` replaces the file's seed; generated
    /// traces follow it.
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => SimError::ScenarioNotFound(path.display().to_string()),
            _ => SimError::Io(e),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Scenario::from_toml_str(&text, base, seed)
    }

    /// Parses scenario text; relative trace paths resolve against `base`.
    pub fn from_toml_str(text: &str, base: &Path, seed: Option<u64>) -> Result<Scenario, SimError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| SimError::Config(e.message().to_string()))?;
        let mut run = file.run;
        if let Some(s) = seed {
            run.seed = s;
        }
        let policy = policy_from(&file.policy)?;
        let slots = crate::slotstats::SlotGrid::new(file.slots.slots_per_day)?;
        let meters = MeterConfig {
            notify: notify_from(&file.meters)?,
            power_factor: file.meters.power_factor,
        };
        let (source, traces) = match file.traces {
            TracesSection {
                generate: Some(spec),
                outlets: None,
                pv: None,
            } => {
                let set = spec.generate(run.seed)?;
                (TraceSource::Generated(spec), set)
            }
            TracesSection {
                generate: None,
                outlets: Some(o),
                pv: Some(p),
            } => {
                let (o, p) = (base.join(o), base.join(p));
                let open = |p: &Path| {
                    std::fs::File::open(p).map_err(|e| SimError::Trace(format!("cannot open {}: {e}", p.display())))
                };
                let outlets = read_outlet_csv(open(&o)?)?;
                let pv = read_pv_trace(open(&p)?)?;
                (TraceSource::Files { outlets: o, pv: p }, TraceSet { outlets, pv })
            }
            _ => {
                return Err(SimError::Config(
                    "[traces] needs either `outlets` and `pv` paths or a `generate` table".into(),
                ))
            }
        };
        let scenario = Scenario {
            run,
            inverter: file.inverter,
            delays: file.delays,
            policy,
            slots,
            meters,
            source,
            traces,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Scenario over traces built in code, with defaults elsewhere.
    pub fn with_traces(outlets: Vec<NamedTrace>, pv: crate::series::StepSeries, policy: PolicyKind) -> Scenario {
        Scenario {
            run: RunConfig::default(),
            inverter: InverterConfig::default(),
            delays: DelayModel::default(),
            policy,
            slots: SlotGrid::default(),
            meters: MeterConfig::default(),
            source: TraceSource::Inline,
            traces: TraceSet { outlets, pv },
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let r = &self.run;
        let bad = |m: String| Err(SimError::Config(m));
        if !(r.duration_s > 0.0) {
            return bad("duration_s must be > 0".into());
        }
        if !(r.decision_period_s > 0.0) || !(r.stats_period_s > 0.0) {
            return bad("decision_period_s and stats_period_s must be > 0".into());
        }
        if !(r.lack_cooldown_s > 0.0) || !(r.overload_tolerance_s >= 0.0) {
            return bad("lack_cooldown_s must be > 0 and overload_tolerance_s >= 0".into());
        }
        let d = &self.delays;
        if !(d.l_r >= 0.0 && d.l_p >= 0.0 && d.l_e >= 0.0) {
            return bad("delays must be >= 0".into());
        }
        if !(self.meters.power_factor > 0.0 && self.meters.power_factor <= 1.0) {
            return bad("power_factor must be in (0, 1]".into());
        }
        self.inverter.validate()?;
        self.policy.validate()?;
        if self.traces.outlets.is_empty() {
            return bad("scenario has no outlets".into());
        }
        let end = r.end_s();
        let covers = |s: &crate::series::StepSeries| s.start() <= 0.0 && s.end() >= end;
        for t in &self.traces.outlets {
            if !covers(&t.series) {
                return Err(SimError::Trace(format!(
                    "outlet {:?} covers [{}, {}) but the run needs [0, {end})",
                    t.name,
                    t.series.start(),
                    t.series.end()
                )));
            }
            if t.series.values().iter().any(|&w| w < 0.0) {
                return Err(SimError::Trace(format!("outlet {:?} has negative power", t.name)));
            }
        }
        if !covers(&self.traces.pv) {
            return Err(SimError::Trace(format!(
                "PV trace covers [{}, {}) but the run needs [0, {end})",
                self.traces.pv.start(),
                self.traces.pv.end()
            )));
        }
        Ok(())
    }

    pub fn outlet_names(&self) -> impl Iterator<Item = &str> {
        self.traces.outlets.iter().map(|t| t.name.as_str())
    }

    /// Same scenario under another policy.
    pub fn with_policy(&self, policy: PolicyKind) -> Scenario {
        Scenario { policy, ..self.clone() }
    }
}

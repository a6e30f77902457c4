//! Hybrid PV inverter: solar first, then battery, then grid.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{SeriesError, StepSeries};

#[derive(Debug, Error)]
pub enum InverterError {
    #[error("invalid inverter configuration: {0}")]
    Config(String),
    #[error("time {0} s is outside the PV trace")]
    OutsideTrace(f64),
    #[error("PV trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverterConfig {
    pub max_output_w: f64,
    /// Nameplate DC power of the panels.
    pub dc_capacity_w: f64,
    pub conversion_efficiency: f64,
    pub battery_capacity_wh: f64,
    /// Applied once, when surplus solar charges the battery.
    pub battery_efficiency: f64,
}

impl Default for InverterConfig {
    fn default() -> Self {
        InverterConfig {
            max_output_w: 800.0,
            dc_capacity_w: 220.0,
            conversion_efficiency: 0.9,
            battery_capacity_wh: 600.0,
            battery_efficiency: 0.9,
        }
    }
}

impl InverterConfig {
    pub fn validate(&self) -> Result<(), InverterError> {
        let bad = |m: &str| Err(InverterError::Config(m.to_string()));
        if !(self.max_output_w > 0.0) {
            return bad("max_output_w must be > 0");
        }
        if !(self.conversion_efficiency > 0.0 && self.conversion_efficiency <= 1.0) {
            return bad("conversion_efficiency must be in (0, 1]");
        }
        if !(self.battery_efficiency > 0.0 && self.battery_efficiency <= 1.0) {
            return bad("battery_efficiency must be in (0, 1]");
        }
        if !(self.battery_capacity_wh >= 0.0) || !(self.dc_capacity_w >= 0.0) {
            return bad("capacities must be >= 0");
        }
        Ok(())
    }

    /// AC power available from the panels alone.
    pub fn ac_solar(&self, dc_w: f64) -> f64 {
        (self.conversion_efficiency * dc_w.max(0.0)).min(self.max_output_w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InverterState {
    pub battery_level_wh: f64,
    pub current_dc_w: f64,
}

/// Energy split of one step, all in Wh.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyStep {
    pub served_by_solar: f64,
    pub served_by_battery: f64,
    pub served_by_grid: f64,
    pub battery_charge: f64,
    /// Solar that could neither serve the load nor fit in the battery.
    pub curtailed: f64,
}

impl InverterState {
    /// Power the inverter can deliver right now: AC solar plus whatever the
    /// battery can add, capped at the rated output.
    pub fn available_w(&self, config: &InverterConfig) -> f64 {
        let battery = if self.battery_level_wh > 0.0 {
            config.max_output_w
        } else {
            0.0
        };
        (config.ac_solar(self.current_dc_w) + battery).min(config.max_output_w)
    }

    /// Serves `demand_w` for `dt_s` seconds at the current DC input.
    pub fn step_energy(&mut self, config: &InverterConfig, dt_s: f64, demand_w: f64) -> EnergyStep {
        let hours = dt_s / 3600.0;
        let solar_wh = config.ac_solar(self.current_dc_w) * hours;
        let demand_wh = demand_w.max(0.0) * hours;
        let from_solar = demand_wh.min(solar_wh);
        let mut rest = demand_wh - from_solar;
        let cap_wh = (config.max_output_w * hours - from_solar).max(0.0);
        let from_battery = rest.min(self.battery_level_wh).min(cap_wh);
        self.battery_level_wh -= from_battery;
        rest -= from_battery;
        let surplus = solar_wh - from_solar;
        let room = config.battery_capacity_wh - self.battery_level_wh;
        let charge = (surplus * config.battery_efficiency).min(room).max(0.0);
        self.battery_level_wh = (self.battery_level_wh + charge).clamp(0.0, config.battery_capacity_wh);
        EnergyStep {
            served_by_solar: from_solar,
            served_by_battery: from_battery,
            served_by_grid: rest,
            battery_charge: charge,
            curtailed: surplus - charge / config.battery_efficiency,
        }
    }
}

/// Inverter bound to a DC production trace.
#[derive(Debug, Clone)]
pub struct Inverter {
    pub config: InverterConfig,
    pub state: InverterState,
    trace: StepSeries,
}

impl Inverter {
    pub fn new(config: InverterConfig, trace: StepSeries) -> Result<Self, InverterError> {
        config.validate()?;
        Ok(Inverter {
            config,
            state: InverterState::default(),
            trace,
        })
    }

    pub fn trace(&self) -> &StepSeries {
        &self.trace
    }

    /// Reads the trace at `time` into the state and returns the available AC
    /// power W.
    pub fn read_production(&mut self, time: f64) -> Result<f64, InverterError> {
        self.state.current_dc_w = self.trace.value_at(time).ok_or(InverterError::OutsideTrace(time))?;
        Ok(self.state.available_w(&self.config))
    }

    pub fn step_energy(&mut self, dt_s: f64, demand_w: f64) -> EnergyStep {
        self.state.step_energy(&self.config, dt_s, demand_w)
    }
}

/// Reads a `time_s,dc_watts` trace. The last row marks the end of coverage.
pub fn read_pv_trace<R: Read>(reader: R) -> Result<StepSeries, InverterError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| InverterError::Trace(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time_s", "dc_watts"] {
        return Err(InverterError::Trace(format!("unexpected header {:?}", headers)));
    }
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| InverterError::Trace(e.to_string()))?;
        let parse = |k: usize| {
            rec[k]
                .parse::<f64>()
                .map_err(|_| InverterError::Trace(format!("row {}: bad number {:?}", i + 2, &rec[k])))
        };
        let (t, w) = (parse(0)?, parse(1)?);
        if w < 0.0 {
            return Err(InverterError::Trace(format!("row {}: negative DC power", i + 2)));
        }
        points.push((t, w));
    }
    Ok(StepSeries::from_points_with_terminal(points)?)
}

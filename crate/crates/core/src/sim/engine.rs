use std::collections::{BTreeMap, BTreeSet};

use super::report::MetricsReport;
use super::{Scenario, SimError};
use crate::bus::{Bus, BusAddress, BusTiming, ChannelKind, Command, LogEntry, Payload};
use crate::electrical::{MeasureSample, NOMINAL_VOLTAGE};
use crate::gateway::{DeviceEntry, DeviceRegistry, Gateway, HistoryStore};
use crate::inverter::{Inverter, InverterState};
use crate::meter::{MeterUnit, OUTPUTS};
use crate::optimizer::OutletId;
use crate::policy::{decide, OutletAssignment};
use crate::slotstats::OutletSlotStats;

/// PV-assigned demand exceeded what the inverter could deliver for longer
/// than the overload tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLackEvent {
    /// When the overload started.
    pub onset: f64,
    /// When it was declared a lack and the outlets went back to the grid.
    pub time: f64,
    pub pv_demand_w: f64,
    pub available_w: f64,
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub lacks: Vec<EnergyLackEvent>,
    pub bus_log: Vec<LogEntry>,
    pub history: HistoryStore,
    pub stats: OutletSlotStats,
    pub assignments: Vec<OutletAssignment>,
}

/// Where an outlet is wired: its metering channel and its PV selector.
#[derive(Debug, Clone, Copy)]
struct Wiring {
    load: (usize, usize),
    selector: (usize, usize),
}

/// Selector channel names in the registry.
pub(crate) fn selector_name(outlet: &str) -> String {
    format!("{outlet}/pv")
}

struct Engine<'a> {
    sc: &'a Scenario,
    units: Vec<MeterUnit>,
    wiring: Vec<Wiring>,
    bus: Bus,
    gateway: Gateway,
    inverter: Inverter,
    stats: OutletSlotStats,
    bypass_until: Option<f64>,
    overload_since: Option<f64>,
    commanded: BTreeSet<OutletId>,
    previous: OutletAssignment,
    lacks: Vec<EnergyLackEvent>,
    assignments: Vec<OutletAssignment>,
    switch_count: u64,
    consumption_wh: f64,
    production_wh: f64,
    self_wh: f64,
    grid_wh: f64,
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario) -> Result<Self, SimError> {
        let n = sc.traces.outlets.len();
        let banks = n.div_ceil(OUTPUTS);
        if 2 * banks > u8::MAX as usize {
            return Err(SimError::Config(format!(
                "{n} outlets need more bus addresses than exist"
            )));
        }
        let mut bus = Bus::new(BusTiming {
            propagation_s: sc.delays.l_p,
            ..BusTiming::default()
        })?;
        bus.attach_passive(BusAddress::GATEWAY)?;
        let mut units = Vec::with_capacity(2 * banks);
        for k in 0..2 * banks {
            let addr = BusAddress(k as u8 + 1);
            units.push(MeterUnit::new(addr, sc.meters.notify)?);
            bus.attach_passive(addr)?;
        }
        let mut registry = DeviceRegistry::new();
        let mut wiring = Vec::with_capacity(n);
        for (k, tr) in sc.traces.outlets.iter().enumerate() {
            let w = Wiring {
                load: (k / OUTPUTS, k % OUTPUTS),
                selector: (banks + k / OUTPUTS, k % OUTPUTS),
            };
            for (name, (u, ch)) in [(tr.name.clone(), w.load), (selector_name(&tr.name), w.selector)] {
                registry.register(DeviceEntry {
                    name,
                    address: units[u].address,
                    channel: ch as u8,
                    kind: ChannelKind::Out,
                    interruptible: false,
                })?;
            }
            wiring.push(w);
        }
        let outlets = (0..n as u32).map(OutletId);
        Ok(Engine {
            sc,
            units,
            wiring,
            bus,
            gateway: Gateway::new(registry),
            inverter: Inverter::new(sc.inverter, sc.traces.pv.clone())?,
            stats: OutletSlotStats::new(sc.slots),
            bypass_until: None,
            overload_since: None,
            commanded: BTreeSet::new(),
            previous: OutletAssignment::all_grid(outlets, 0.0),
            lacks: Vec::new(),
            assignments: Vec::new(),
            switch_count: 0,
            consumption_wh: 0.0,
            production_wh: 0.0,
            self_wh: 0.0,
            grid_wh: 0.0,
        })
    }

    fn outlets(&self) -> impl Iterator<Item = OutletId> {
        (0..self.wiring.len() as u32).map(OutletId)
    }

    fn relay(&self, (u, ch): (usize, usize)) -> bool {
        self.units[u].outputs[ch].relay_on
    }

    /// True draw of an outlet at `t`; nothing flows through an open load relay.
    fn draw(&self, o: OutletId, t: f64) -> f64 {
        let k = o.0 as usize;
        if !self.relay(self.wiring[k].load) {
            return 0.0;
        }
        self.sc.traces.outlets[k].series.value_clamped(t)
    }

    fn on_pv(&self, o: OutletId) -> bool {
        self.bypass_until.is_none() && self.relay(self.wiring[o.0 as usize].selector)
    }

    fn pv_demand(&self, t: f64) -> f64 {
        self.outlets().filter(|&o| self.on_pv(o)).map(|o| self.draw(o, t)).sum()
    }

    fn transmit_all(&mut self, frames: Vec<crate::bus::BusFrame>, t: f64) -> Result<(), SimError> {
        for f in frames {
            self.bus.transmit(f, t)?;
        }
        Ok(())
    }

    fn unit_index(&self, addr: BusAddress) -> Option<usize> {
        (addr.0 as usize).checked_sub(1).filter(|&i| i < self.units.len())
    }

    fn deliver(&mut self, t: f64) -> Result<(), SimError> {
        while let Some(d) = self.bus.deliver_next_until(t) {
            let now = d.time();
            self.gateway.handle_frame(&d.frame, now);
            let Some(u) = self.unit_index(d.frame.recipient) else {
                continue;
            };
            let before = match d.frame.payload {
                Payload::Command(Command::ControlOut { channel, .. }) => {
                    Some((channel as usize, self.relay((u, channel as usize))))
                }
                _ => None,
            };
            let replies = self.units[u].handle_frame(&d.frame, now)?;
            if let Some((ch, was)) = before {
                let is_selector = self.wiring.iter().any(|w| w.selector == (u, ch));
                if is_selector && self.relay((u, ch)) != was {
                    self.switch_count += 1;
                }
            }
            self.transmit_all(replies, now)?;
        }
        Ok(())
    }

    fn sample_meters(&mut self, t: f64) -> Result<(), SimError> {
        let pf = self.sc.meters.power_factor;
        for k in 0..self.wiring.len() {
            let w = self.sc.traces.outlets[k].series.value_clamped(t);
            let load = MeasureSample::from_load(w, pf, NOMINAL_VOLTAGE)
                .map_err(|e| SimError::Trace(format!("outlet {}: {e}", self.sc.traces.outlets[k].name)))?;
            let (u, ch) = self.wiring[k].load;
            let outcome = self.units[u].sample(ch, &load, t)?;
            self.transmit_all(outcome.frames, t)?;
        }
        Ok(())
    }

    fn record_stats(&mut self, t: f64) -> Result<(), SimError> {
        for k in 0..self.wiring.len() {
            let w = self.sc.traces.outlets[k].series.value_clamped(t);
            self.stats.record(OutletId(k as u32), t, w)?;
        }
        Ok(())
    }

    fn command(&mut self, o: OutletId, on: bool, t: f64) -> Result<(), SimError> {
        let name = selector_name(&self.sc.traces.outlets[o.0 as usize].name);
        self.gateway.send_command(&mut self.bus, &name, on, t)?;
        Ok(())
    }

    /// Decides on a snapshot `L_monitor` old and sends the relay changes,
    /// switch-offs first.
    fn decide(&mut self, t: f64) -> Result<(), SimError> {
        let snap = t - self.sc.delays.monitor();
        let pf = self.sc.meters.power_factor;
        let readings: BTreeMap<OutletId, f64> = self.outlets().map(|o| (o, self.draw(o, snap) / pf)).collect();
        let stale = InverterState {
            battery_level_wh: self.inverter.state.battery_level_wh,
            current_dc_w: self.sc.traces.pv.value_clamped(snap),
        };
        let production = stale.available_w(&self.sc.inverter);
        let assignment = decide(&self.sc.policy, production, &readings, &self.stats, t, &self.previous)?;
        let offs: Vec<_> = self.commanded.difference(&assignment.pv_set).copied().collect();
        let ons: Vec<_> = assignment.pv_set.difference(&self.commanded).copied().collect();
        for o in offs {
            self.command(o, false, t)?;
        }
        for o in ons {
            self.command(o, true, t)?;
        }
        self.commanded = assignment.pv_set.clone();
        self.previous = assignment.clone();
        self.assignments.push(assignment);
        Ok(())
    }

    fn check_lack(&mut self, t: f64) -> Result<(), SimError> {
        let available = self.inverter.read_production(t)?;
        if self.bypass_until.is_some() {
            return Ok(());
        }
        let demand = self.pv_demand(t);
        if demand <= available + 1e-9 {
            self.overload_since = None;
            return Ok(());
        }
        let since = *self.overload_since.get_or_insert(t);
        if t < since + self.sc.run.overload_tolerance_s {
            return Ok(());
        }
        log::debug!("energy lack at {t:.3}: {demand:.1} W on PV, {available:.1} W available");
        self.lacks.push(EnergyLackEvent {
            onset: since,
            time: t,
            pv_demand_w: demand,
            available_w: available,
        });
        self.overload_since = None;
        self.bypass_until = Some(t + self.sc.run.lack_cooldown_s);
        for o in std::mem::take(&mut self.commanded) {
            self.command(o, false, t)?;
        }
        self.previous = OutletAssignment::all_grid(self.outlets(), t);
        Ok(())
    }

    /// When the battery runs dry at the current PV demand, if it is draining.
    fn battery_empty_at(&self, t: f64) -> Option<f64> {
        let cfg = &self.sc.inverter;
        let level = self.inverter.state.battery_level_wh;
        let solar = cfg.ac_solar(self.inverter.state.current_dc_w);
        let drain = (self.pv_demand(t) - solar).min(cfg.max_output_w - solar);
        (level > 0.0 && drain > 0.0).then(|| t + level * 3600.0 / drain)
    }

    fn integrate(&mut self, t: f64, dt: f64) {
        if dt <= 0.0 {
            return;
        }
        let hours = dt / 3600.0;
        let loads: f64 = self.outlets().map(|o| self.draw(o, t)).sum();
        let pv = self.pv_demand(t);
        self.consumption_wh += loads * hours;
        self.production_wh += self.sc.inverter.ac_solar(self.inverter.state.current_dc_w) * hours;
        let step = self.inverter.step_energy(dt, pv);
        if self.inverter.state.battery_level_wh < 1e-9 {
            self.inverter.state.battery_level_wh = 0.0;
        }
        self.self_wh += step.served_by_solar + step.served_by_battery;
        self.grid_wh += step.served_by_grid + (loads - pv) * hours;
    }
}

/// Runs the scenario: warm-up statistics, then the measured period event by
/// event.
pub fn run(sc: &Scenario) -> Result<RunOutput, SimError> {
    sc.validate()?;
    let mut e = Engine::new(sc)?;
    let (t0, t_end) = (sc.run.start_s(), sc.run.end_s());
    let (l_r, period, sp) = (sc.delays.l_r, sc.run.decision_period_s, sc.run.stats_period_s);

    let mut stats_k: u64 = 0;
    while (stats_k as f64) * sp < t0 {
        e.record_stats(stats_k as f64 * sp)?;
        stats_k += 1;
    }

    let mut changes: Vec<f64> = sc
        .traces
        .outlets
        .iter()
        .map(|tr| &tr.series)
        .chain(std::iter::once(&sc.traces.pv))
        .flat_map(|s| s.points().map(|(t, _)| t))
        .filter(|&t| t > t0 && t < t_end)
        .collect();
    changes.sort_by(f64::total_cmp);
    changes.dedup();

    for k in 0..e.wiring.len() {
        let (u, ch) = e.wiring[k].load;
        let ack = e.units[u].control_out(ch, true)?;
        e.transmit_all(ack.variation.into_iter().collect(), t0)?;
    }
    e.inverter.read_production(t0)?;

    let mut t = t0;
    let mut ci = 0;
    let mut sample_k: u64 = 0;
    let mut decision_k = (t0 / period).ceil() as u64;
    let sample_time = |k: u64| t0 + k as f64 * l_r;
    let mut first = true;
    loop {
        let mut changed = first;
        while changes.get(ci).is_some_and(|&c| c <= t) {
            changed = true;
            ci += 1;
        }
        first = false;

        e.deliver(t)?;
        if e.bypass_until.is_some_and(|b| b <= t) {
            e.bypass_until = None;
        }
        if l_r > 0.0 {
            while sample_time(sample_k) <= t {
                e.sample_meters(t)?;
                sample_k += 1;
            }
        } else if changed {
            e.sample_meters(t)?;
        }
        while (stats_k as f64) * sp <= t {
            e.record_stats(t)?;
            stats_k += 1;
        }
        if (decision_k as f64) * period <= t {
            decision_k += 1;
            if e.bypass_until.is_none() {
                e.decide(t)?;
            }
        }
        e.check_lack(t)?;

        let mut next = t_end;
        let mut consider = |c: Option<f64>| {
            if let Some(c) = c {
                next = next.min(c);
            }
        };
        consider(changes.get(ci).copied());
        consider((l_r > 0.0).then(|| sample_time(sample_k)));
        consider(Some(stats_k as f64 * sp));
        consider(Some(decision_k as f64 * period));
        consider(e.bus.next_delivery_time());
        consider(e.bypass_until);
        consider(e.overload_since.map(|s| s + sc.run.overload_tolerance_s));
        consider(e.battery_empty_at(t));
        e.integrate(t, next - t);
        t = next;
        if t >= t_end {
            break;
        }
    }

    let decisions = e.assignments.len();
    let margin = sc.policy.fixed_margin().unwrap_or_else(|| {
        if decisions == 0 {
            0.0
        } else {
            e.assignments.iter().map(|a| a.effective_margin).sum::<f64>() / decisions as f64
        }
    });
    let report = MetricsReport {
        policy: sc.policy.name().to_string(),
        margin,
        slots: sc.slots.slots_per_day,
        total_consumption_wh: e.consumption_wh,
        total_production_wh: e.production_wh,
        self_consumed_wh: e.self_wh,
        grid_served_wh: e.grid_wh,
        error_count: e.lacks.len() as u64,
        switch_count: e.switch_count,
        decisions: decisions as u64,
    };
    Ok(RunOutput {
        report,
        lacks: e.lacks,
        bus_log: e.bus.log().to_vec(),
        history: e.gateway.history().clone(),
        stats: e.stats,
        assignments: e.assignments,
    })
}

/// Slot statistics of every outlet over the whole trace coverage, sampled
/// every `stats_period_s`.
pub fn replay_stats(sc: &Scenario) -> Result<OutletSlotStats, SimError> {
    sc.validate()?;
    let mut stats = OutletSlotStats::new(sc.slots);
    let end = sc.run.end_s();
    let mut k: u64 = 0;
    while (k as f64) * sc.run.stats_period_s < end {
        let t = k as f64 * sc.run.stats_period_s;
        for (i, tr) in sc.traces.outlets.iter().enumerate() {
            stats.record(OutletId(i as u32), t, tr.series.value_clamped(t))?;
        }
        k += 1;
    }
    Ok(stats)
}

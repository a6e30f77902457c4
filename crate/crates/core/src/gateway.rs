//! Gateway supervisor: listens to every frame on the bus, mirrors device
//! state, keeps the measurement history and issues commands on behalf of
//! clients addressed by logical device name.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::bus::{Bus, BusAddress, BusError, BusFrame, ChannelKind, Command, Payload, Scheduled};
use crate::electrical::{derive_measures_or_nominal, DerivedMeasures, MeasureSample};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("unknown device name {0:?}")]
    UnknownName(String),
    #[error("device {0:?} is an input and cannot be commanded")]
    NotAnOutput(String),
    #[error("duplicate device name {0:?}")]
    DuplicateName(String),
    #[error("invalid query range: {0}")]
    Range(String),
    #[error("registry line {line}: {msg}")]
    RegistryFormat { line: usize, msg: String },
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceEntry {
    pub name: String,
    pub address: BusAddress,
    pub channel: u8,
    pub kind: ChannelKind,
    pub interruptible: bool,
}

/// Logical name → (meter address, channel, kind).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeviceRegistry {
    entries: Vec<DeviceEntry>,
    by_name: BTreeMap<String, usize>,
    by_channel: BTreeMap<(BusAddress, u8, bool), usize>,
}

impl DeviceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, entry: DeviceEntry) -> Result<(), GatewayError> {
        if self.by_name.contains_key(&entry.name) {
            return Err(GatewayError::DuplicateName(entry.name));
        }
        let idx = self.entries.len();
        self.by_name.insert(entry.name.clone(), idx);
        self.by_channel
            .insert((entry.address, entry.channel, entry.kind == ChannelKind::Out), idx);
        self.entries.push(entry);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&DeviceEntry> {
        self.by_name.get(name).map(|&i| &self.entries[i])
    }

    pub fn lookup(&self, address: BusAddress, channel: u8, kind: ChannelKind) -> Option<&DeviceEntry> {
        self.by_channel
            .get(&(address, channel, kind == ChannelKind::Out))
            .map(|&i| &self.entries[i])
    }

    pub fn knows_address(&self, address: BusAddress) -> bool {
        self.entries.iter().any(|e| e.address == address)
    }

    pub fn entries(&self) -> &[DeviceEntry] {
        &self.entries
    }

    /// Parses `name,address,channel,kind,interruptible(0|1)` lines. A header
    /// line starting with `name` and `#` comments are skipped.
    pub fn read_from<R: BufRead>(reader: R) -> Result<Self, GatewayError> {
        let mut reg = DeviceRegistry::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("name,") {
                continue;
            }
            let err = |msg: &str| GatewayError::RegistryFormat {
                line: n + 1,
                msg: msg.to_string(),
            };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(err("expected 5 fields"));
            }
            let address = f[1].parse::<u8>().map_err(|_| err("bad address"))?;
            let channel = f[2].parse::<u8>().map_err(|_| err("bad channel"))?;
            let kind = match f[3] {
                "in" => ChannelKind::In,
                "out" => ChannelKind::Out,
                _ => return Err(err("kind must be in|out")),
            };
            let interruptible = match f[4] {
                "0" => false,
                "1" => true,
                _ => return Err(err("interruptible must be 0|1")),
            };
            reg.register(DeviceEntry {
                name: f[0].to_string(),
                address: BusAddress(address),
                channel,
                kind,
                interruptible,
            })?;
        }
        Ok(reg)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "name,address,channel,kind,interruptible")?;
        for e in &self.entries {
            let kind = if e.kind == ChannelKind::Out { "out" } else { "in" };
            writeln!(
                w,
                "{},{},{},{},{}",
                e.name, e.address, e.channel, kind, e.interruptible as u8
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub time: f64,
    pub sample: MeasureSample,
    pub derived: DerivedMeasures,
}

/// Per-device time-ordered measurement rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoryStore {
    rows: BTreeMap<String, Vec<HistoryRow>>,
}

impl HistoryStore {
    /// Appends a row; a row at the same instant as the last one replaces it so
    /// timestamps stay strictly increasing. Older rows are dropped.
    fn append(&mut self, name: &str, row: HistoryRow) -> bool {
        let rows = self.rows.entry(name.to_string()).or_default();
        match rows.last() {
            Some(last) if row.time < last.time => false,
            Some(last) if row.time == last.time => {
                *rows.last_mut().unwrap() = row;
                true
            }
            _ => {
                rows.push(row);
                true
            }
        }
    }

    pub fn rows(&self, name: &str) -> &[HistoryRow] {
        self.rows.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    /// `time_s,channel,apparent_va,power_factor,current_a,active_w,reactive_var`,
    /// ordered by time then channel name.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "time_s,channel,apparent_va,power_factor,current_a,active_w,reactive_var"
        )?;
        let mut all: Vec<(&str, &HistoryRow)> = self
            .rows
            .iter()
            .flat_map(|(n, rows)| rows.iter().map(move |r| (n.as_str(), r)))
            .collect();
        all.sort_by(|a, b| a.1.time.total_cmp(&b.1.time).then(a.0.cmp(b.0)));
        for (name, r) in all {
            writeln!(
                w,
                "{:.6},{},{:.3},{:.3},{:.3},{:.6},{:.6}",
                r.time,
                name,
                r.sample.apparent_power,
                r.sample.power_factor,
                r.sample.current,
                r.derived.active_power,
                r.derived.reactive_power
            )?;
        }
        Ok(())
    }
}

/// Pushed to subscribers after the gateway processes a frame.
#[derive(Debug, Clone, PartialEq)]
pub enum GatewayEvent {
    StateChanged { name: String, on: bool, time: f64 },
    Measurement { name: String, row: HistoryRow },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryBucket {
    pub start: f64,
    pub mean_active_w: f64,
    pub mean_apparent_va: f64,
    pub mean_power_factor: f64,
}

pub type Subscriber = Box<dyn Fn(&GatewayEvent) + Send + Sync>;

pub struct Gateway {
    registry: DeviceRegistry,
    mirrored: BTreeMap<(BusAddress, u8, bool), bool>,
    history: HistoryStore,
    raw_log: Vec<(f64, BusFrame)>,
    subscribers: Vec<Subscriber>,
    warnings: usize,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("devices", &self.registry.entries().len())
            .field("raw_frames", &self.raw_log.len())
            .field("warnings", &self.warnings)
            .finish()
    }
}

impl Gateway {
    pub fn new(registry: DeviceRegistry) -> Self {
        Gateway {
            registry,
            mirrored: BTreeMap::new(),
            history: HistoryStore::default(),
            raw_log: Vec::new(),
            subscribers: Vec::new(),
            warnings: 0,
        }
    }

    pub fn registry(&self) -> &DeviceRegistry {
        &self.registry
    }

    pub fn history(&self) -> &HistoryStore {
        &self.history
    }

    pub fn raw_log(&self) -> &[(f64, BusFrame)] {
        &self.raw_log
    }

    pub fn warnings(&self) -> usize {
        self.warnings
    }

    pub fn subscribe<F>(&mut self, f: F)
    where
        F: Fn(&GatewayEvent) + Send + Sync + 'static,
    {
        self.subscribers.push(Box::new(f));
    }

    fn push(&self, ev: GatewayEvent) {
        for s in &self.subscribers {
            s(&ev);
        }
    }

    /// Mirrored state of a named device, `None` until the gateway has seen it.
    pub fn state(&self, name: &str) -> Option<bool> {
        let e = self.registry.get(name)?;
        self.mirrored
            .get(&(e.address, e.channel, e.kind == ChannelKind::Out))
            .copied()
    }

    /// Processes any frame seen on the bus. Every frame lands in the raw log.
    pub fn handle_frame(&mut self, frame: &BusFrame, time: f64) {
        self.raw_log.push((time, frame.clone()));
        let from = frame.sender;
        if from != BusAddress::GATEWAY && !self.registry.knows_address(from) {
            self.warnings += 1;
            log::warn!("frame from unregistered address {} ({})", from, frame.kind());
            return;
        }
        match frame.payload {
            Payload::OutVariation { channel, on } => self.mirror(from, channel, ChannelKind::Out, on, time),
            Payload::InVariation { channel, on } => self.mirror(from, channel, ChannelKind::In, on, time),
            Payload::StateReply { kind, channel, on } => self.mirror(from, channel, kind, on, time),
            Payload::PowerVariation { channel, sample } | Payload::MeasureReply { channel, sample, .. } => {
                self.measurement(from, channel, &sample, time)
            }
            _ => {}
        }
    }

    fn mirror(&mut self, address: BusAddress, channel: u8, kind: ChannelKind, on: bool, time: f64) {
        self.mirrored.insert((address, channel, kind == ChannelKind::Out), on);
        if let Some(e) = self.registry.lookup(address, channel, kind) {
            let ev = GatewayEvent::StateChanged {
                name: e.name.clone(),
                on,
                time,
            };
            self.push(ev);
        }
    }

    fn measurement(&mut self, address: BusAddress, channel: u8, sample: &MeasureSample, time: f64) {
        let Some(name) = self
            .registry
            .lookup(address, channel, ChannelKind::Out)
            .map(|e| e.name.clone())
        else {
            self.warnings += 1;
            log::warn!("measurement for unregistered channel {}:{}", address, channel);
            return;
        };
        let sample = crate::bus::quantize(sample);
        let derived = match derive_measures_or_nominal(&sample) {
            Ok(d) => d,
            Err(e) => {
                self.warnings += 1;
                log::warn!("dropping measurement from {}:{}: {}", address, channel, e);
                return;
            }
        };
        let row = HistoryRow { time, sample, derived };
        if self.history.append(&name, row) {
            self.push(GatewayEvent::Measurement { name, row });
        }
    }

    /// Puts a controlOut frame on the bus. The mirrored state changes only
    /// once the unit's outVariation comes back.
    pub fn send_command(&self, bus: &mut Bus, name: &str, on: bool, now: f64) -> Result<Scheduled, GatewayError> {
        let e = self
            .registry
            .get(name)
            .ok_or_else(|| GatewayError::UnknownName(name.to_string()))?;
        if e.kind != ChannelKind::Out {
            return Err(GatewayError::NotAnOutput(name.to_string()));
        }
        let frame = BusFrame::new(
            BusAddress::GATEWAY,
            e.address,
            Payload::Command(Command::ControlOut { channel: e.channel, on }),
        );
        Ok(bus.transmit(frame, now)?)
    }

    /// Time-weighted bucket means over `[t0, t1)`, holding each row until the
    /// next one. Time before the first row counts as zero.
    pub fn query_history(
        &self,
        name: &str,
        t0: f64,
        t1: f64,
        resolution: f64,
    ) -> Result<Vec<HistoryBucket>, GatewayError> {
        if self.registry.get(name).is_none() {
            return Err(GatewayError::UnknownName(name.to_string()));
        }
        if !(t0 < t1) {
            return Err(GatewayError::Range(format!("t0 {t0} must precede t1 {t1}")));
        }
        if !(resolution > 0.0) {
            return Err(GatewayError::Range(format!("resolution {resolution} must be positive")));
        }
        let rows = self.history.rows(name);
        let n = ((t1 - t0) / resolution).ceil() as usize;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let a = t0 + k as f64 * resolution;
            let b = (a + resolution).min(t1);
            let (mut pa, mut p, mut pf) = (0.0, 0.0, 0.0);
            // rows active in [a, b)
            let first = rows.partition_point(|r| r.time <= a).saturating_sub(1);
            let mut i = first;
            let mut covered = 0.0;
            while i < rows.len() && rows[i].time < b {
                let from = rows[i].time.max(a);
                let to = rows.get(i + 1).map_or(b, |r| r.time.min(b));
                if to > from {
                    let w = to - from;
                    pa += rows[i].derived.active_power * w;
                    p += rows[i].sample.apparent_power * w;
                    pf += rows[i].sample.power_factor * w;
                    covered += w;
                }
                i += 1;
            }
            let width = b - a;
            out.push(HistoryBucket {
                start: a,
                mean_active_w: pa / width,
                mean_apparent_va: p / width,
                mean_power_factor: if covered > 0.0 { pf / covered } else { 0.0 },
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::BusTiming;
    use crate::meter::{MeterUnit, NotificationMode};
    use std::sync::{Arc, Mutex};

    fn registry() -> DeviceRegistry {
        let mut r = DeviceRegistry::new();
        for (name, ch, kind) in [
            ("desk-lamp", 2, ChannelKind::Out),
            ("heater", 3, ChannelKind::Out),
            ("door", 0, ChannelKind::In),
        ] {
            r.register(DeviceEntry {
                name: name.into(),
                address: BusAddress(1),
                channel: ch,
                kind,
                interruptible: true,
            })
            .unwrap();
        }
        r
    }

    fn pv(channel: u8, p: f64, pf: f64, c: f64) -> BusFrame {
        BusFrame::new(
            BusAddress(1),
            BusAddress::GATEWAY,
            Payload::PowerVariation {
                channel,
                sample: MeasureSample {
                    apparent_power: p,
                    power_factor: pf,
                    current: c,
                },
            },
        )
    }

    #[test]
    fn power_variation_appends_derived_row() {
        let mut g = Gateway::new(registry());
        let events = Arc::new(Mutex::new(0));
        let ev = events.clone();
        g.subscribe(move |_| *ev.lock().unwrap() += 1);
        g.handle_frame(&pv(3, 150.0, 0.9, 0.7), 1.0);
        let rows = g.history().rows("heater");
        assert_eq!(rows.len(), 1);
        assert!((rows[0].derived.active_power - 135.0).abs() < 1e-9);
        assert_eq!(*events.lock().unwrap(), 1);
    }

    #[test]
    fn out_variation_updates_mirror_and_unknown_sender_warns() {
        let mut g = Gateway::new(registry());
        assert_eq!(g.state("desk-lamp"), None);
        g.handle_frame(
            &BusFrame::new(
                BusAddress(1),
                BusAddress::GATEWAY,
                Payload::OutVariation { channel: 2, on: true },
            ),
            0.5,
        );
        assert_eq!(g.state("desk-lamp"), Some(true));
        g.handle_frame(
            &BusFrame::new(
                BusAddress(99),
                BusAddress::GATEWAY,
                Payload::OutVariation { channel: 2, on: false },
            ),
            0.6,
        );
        assert_eq!(g.state("desk-lamp"), Some(true));
        assert_eq!(g.warnings(), 1);
        assert_eq!(g.raw_log().len(), 2);
    }

    #[test]
    fn command_round_trip_through_bus() {
        let mut bus = Bus::new(BusTiming::default()).unwrap();
        bus.attach_passive(BusAddress::GATEWAY).unwrap();
        bus.attach_passive(BusAddress(1)).unwrap();
        let mut g = Gateway::new(registry());
        let mut meter = MeterUnit::new(BusAddress(1), NotificationMode::AbsoluteDelta(5.0)).unwrap();
        g.send_command(&mut bus, "desk-lamp", true, 0.0).unwrap();
        assert_eq!(g.state("desk-lamp"), None);
        let mut t = 0.0;
        while let Some(next) = bus.next_delivery_time() {
            t = next;
            for d in bus.deliver_until(t) {
                g.handle_frame(&d.frame, d.time());
                for reply in meter.handle_frame(&d.frame, d.time()).unwrap() {
                    bus.transmit(reply, d.time()).unwrap();
                }
            }
        }
        assert!(t > 0.0);
        assert_eq!(g.state("desk-lamp"), Some(true));
        assert!(meter.outputs[2].relay_on);
    }

    #[test]
    fn command_errors() {
        let mut bus = Bus::new(BusTiming::default()).unwrap();
        bus.attach_passive(BusAddress::GATEWAY).unwrap();
        let g = Gateway::new(registry());
        assert!(matches!(
            g.send_command(&mut bus, "unknown", true, 0.0),
            Err(GatewayError::UnknownName(_))
        ));
        assert!(matches!(
            g.send_command(&mut bus, "door", true, 0.0),
            Err(GatewayError::NotAnOutput(_))
        ));
    }

    #[test]
    fn history_buckets_hold_last_value() {
        let mut g = Gateway::new(registry());
        g.handle_frame(&pv(3, 100.0, 1.0, 0.5), 0.0);
        let b = g.query_history("heater", 0.0, 60.0, 60.0).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0].mean_apparent_va - 100.0).abs() < 1e-9);
        g.handle_frame(&pv(3, 200.0, 1.0, 1.0), 30.0);
        let b = g.query_history("heater", 0.0, 60.0, 60.0).unwrap();
        assert!((b[0].mean_apparent_va - 150.0).abs() < 1e-9);
        let b = g.query_history("heater", 0.0, 120.0, 60.0).unwrap();
        assert_eq!(b.len(), 2);
        assert!((b[1].mean_apparent_va - 200.0).abs() < 1e-9);
        assert!(g.query_history("heater", 10.0, 10.0, 1.0).is_err());
        assert!(g.query_history("heater", 0.0, 10.0, 0.0).is_err());
        assert!(g.query_history("nope", 0.0, 10.0, 1.0).is_err());
    }

    #[test]
    fn history_csv_and_registry_io() {
        let mut g = Gateway::new(registry());
        g.handle_frame(&pv(2, 100.0, 0.8, 1.0), 2.0);
        let mut buf = Vec::new();
        g.history().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "time_s,channel,apparent_va,power_factor,current_a,active_w,reactive_var\n\
             2.000000,desk-lamp,100.000,0.800,1.000,80.000000,60.000000\n"
        );
        let mut reg = Vec::new();
        registry().write_to(&mut reg).unwrap();
        let back = DeviceRegistry::read_from(reg.as_slice()).unwrap();
        assert_eq!(back, registry());
        assert!(DeviceRegistry::read_from("a,1,2,sideways,1\n".as_bytes()).is_err());
        assert!(DeviceRegistry::read_from("a,1,2,out,1\na,1,3,out,0\n".as_bytes()).is_err());
    }
}

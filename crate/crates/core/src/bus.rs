//! Shared serial bus emulation.
//!
//! Every frame is perceived by all attached nodes; only the node whose address
//! matches the recipient processes it, except the gateway which processes
//! everything. The medium is a single FIFO: a frame acquires the bus when the
//! previous one has finished serializing and holds it for
//! `size_bytes * bits_per_byte / baud_rate` seconds.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::electrical::MeasureSample;

/// Fixed header: sender, recipient, kind, payload length.
pub const HEADER_BYTES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BusError {
    #[error("sender {0} is not attached to the bus")]
    DetachedSender(BusAddress),
    #[error("address {0} is already attached")]
    DuplicateAddress(BusAddress),
    #[error("payload of {size} bytes exceeds the {max}-byte limit")]
    OversizedPayload { size: usize, max: usize },
    #[error("invalid bus timing: {0}")]
    InvalidTiming(String),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("request time {0} is not a valid time")]
    InvalidTime(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BusAddress(pub u8);

impl BusAddress {
    pub const GATEWAY: BusAddress = BusAddress(0);
}

impl fmt::Display for BusAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelKind {
    In,
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameKind {
    Command,
    StateReply,
    MeasureReply,
    InVariation,
    OutVariation,
    PowerVariation,
    MeasureRequest,
    AvgMeasureRequest,
}

impl FrameKind {
    pub fn code(self) -> u8 {
        match self {
            FrameKind::Command => 1,
            FrameKind::StateReply => 2,
            FrameKind::MeasureReply => 3,
            FrameKind::InVariation => 4,
            FrameKind::OutVariation => 5,
            FrameKind::PowerVariation => 6,
            FrameKind::MeasureRequest => 7,
            FrameKind::AvgMeasureRequest => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrameKind::Command => "command",
            FrameKind::StateReply => "state-reply",
            FrameKind::MeasureReply => "measure-reply",
            FrameKind::InVariation => "in-variation",
            FrameKind::OutVariation => "out-variation",
            FrameKind::PowerVariation => "power-variation",
            FrameKind::MeasureRequest => "measure-request",
            FrameKind::AvgMeasureRequest => "avg-measure-request",
        }
    }
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Synchronous commands carried by a [`FrameKind::Command`] frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Command {
    ControlOut { channel: u8, on: bool },
    ReadOutState { channel: u8 },
    ReadInState { channel: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Command(Command),
    StateReply {
        kind: ChannelKind,
        channel: u8,
        on: bool,
    },
    MeasureReply {
        channel: u8,
        averaged: bool,
        sample: MeasureSample,
    },
    InVariation {
        channel: u8,
        on: bool,
    },
    OutVariation {
        channel: u8,
        on: bool,
    },
    PowerVariation {
        channel: u8,
        sample: MeasureSample,
    },
    MeasureRequest {
        channel: u8,
    },
    AvgMeasureRequest {
        channel: u8,
    },
}

impl Payload {
    pub fn kind(&self) -> FrameKind {
        match self {
            Payload::Command(_) => FrameKind::Command,
            Payload::StateReply { .. } => FrameKind::StateReply,
            Payload::MeasureReply { .. } => FrameKind::MeasureReply,
            Payload::InVariation { .. } => FrameKind::InVariation,
            Payload::OutVariation { .. } => FrameKind::OutVariation,
            Payload::PowerVariation { .. } => FrameKind::PowerVariation,
            Payload::MeasureRequest { .. } => FrameKind::MeasureRequest,
            Payload::AvgMeasureRequest { .. } => FrameKind::AvgMeasureRequest,
        }
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        match *self {
            Payload::Command(Command::ControlOut { channel, on }) => out.extend([0, channel, on as u8]),
            Payload::Command(Command::ReadOutState { channel }) => out.extend([1, channel, 0]),
            Payload::Command(Command::ReadInState { channel }) => out.extend([2, channel, 0]),
            Payload::StateReply { kind, channel, on } => {
                out.extend([matches!(kind, ChannelKind::Out) as u8, channel, on as u8])
            }
            Payload::MeasureReply {
                channel,
                averaged,
                sample,
            } => {
                out.extend([channel, averaged as u8]);
                encode_sample(&sample, out);
            }
            Payload::InVariation { channel, on } | Payload::OutVariation { channel, on } => {
                out.extend([channel, on as u8])
            }
            Payload::PowerVariation { channel, sample } => {
                out.push(channel);
                encode_sample(&sample, out);
            }
            Payload::MeasureRequest { channel } | Payload::AvgMeasureRequest { channel } => out.push(channel),
        }
    }

    /// Encoded payload length in bytes.
    pub fn len(&self) -> usize {
        match self {
            Payload::Command(_) | Payload::StateReply { .. } => 3,
            Payload::MeasureReply { .. } => 2 + SAMPLE_BYTES,
            Payload::InVariation { .. } | Payload::OutVariation { .. } => 2,
            Payload::PowerVariation { .. } => 1 + SAMPLE_BYTES,
            Payload::MeasureRequest { .. } | Payload::AvgMeasureRequest { .. } => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

const SAMPLE_BYTES: usize = 5;

/// P in whole VA (u16), PF in hundredths (u8), current in centiamperes (u16).
fn encode_sample(s: &MeasureSample, out: &mut Vec<u8>) {
    let p = s.apparent_power.round().clamp(0.0, u16::MAX as f64) as u16;
    let pf = (s.power_factor * 100.0).round().clamp(0.0, 100.0) as u8;
    let c = (s.current * 100.0).round().clamp(0.0, u16::MAX as f64) as u16;
    out.extend(p.to_be_bytes());
    out.push(pf);
    out.extend(c.to_be_bytes());
}

fn decode_sample(b: &[u8]) -> MeasureSample {
    MeasureSample {
        apparent_power: u16::from_be_bytes([b[0], b[1]]) as f64,
        power_factor: b[2] as f64 / 100.0,
        current: u16::from_be_bytes([b[3], b[4]]) as f64 / 100.0,
    }
}

/// Wire quantization applied to samples carried in frames.
pub fn quantize(sample: &MeasureSample) -> MeasureSample {
    let mut buf = Vec::with_capacity(SAMPLE_BYTES);
    encode_sample(sample, &mut buf);
    decode_sample(&buf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusFrame {
    pub sender: BusAddress,
    pub recipient: BusAddress,
    pub payload: Payload,
}

impl BusFrame {
    pub fn new(sender: BusAddress, recipient: BusAddress, payload: Payload) -> Self {
        BusFrame {
            sender,
            recipient,
            payload,
        }
    }

    pub fn kind(&self) -> FrameKind {
        self.payload.kind()
    }

    pub fn size_bytes(&self) -> usize {
        HEADER_BYTES + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.size_bytes());
        out.extend([
            self.sender.0,
            self.recipient.0,
            self.kind().code(),
            self.payload.len() as u8,
        ]);
        self.payload.encode_into(&mut out);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, BusError> {
        if bytes.len() < HEADER_BYTES {
            return Err(BusError::Malformed(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        let (sender, recipient, code, len) = (bytes[0], bytes[1], bytes[2], bytes[3] as usize);
        let body = &bytes[HEADER_BYTES..];
        if body.len() != len {
            return Err(BusError::Malformed(format!(
                "declared {len} payload bytes, found {}",
                body.len()
            )));
        }
        let need = |n: usize| {
            if len == n {
                Ok(())
            } else {
                Err(BusError::Malformed(format!(
                    "kind {code} expects {n} payload bytes, got {len}"
                )))
            }
        };
        let payload = match code {
            1 => {
                need(3)?;
                let channel = body[1];
                Payload::Command(match body[0] {
                    0 => Command::ControlOut {
                        channel,
                        on: body[2] != 0,
                    },
                    1 => Command::ReadOutState { channel },
                    2 => Command::ReadInState { channel },
                    op => return Err(BusError::Malformed(format!("unknown command opcode {op}"))),
                })
            }
            2 => {
                need(3)?;
                Payload::StateReply {
                    kind: if body[0] == 1 {
                        ChannelKind::Out
                    } else {
                        ChannelKind::In
                    },
                    channel: body[1],
                    on: body[2] != 0,
                }
            }
            3 => {
                need(2 + SAMPLE_BYTES)?;
                Payload::MeasureReply {
                    channel: body[0],
                    averaged: body[1] != 0,
                    sample: decode_sample(&body[2..]),
                }
            }
            4 | 5 => {
                need(2)?;
                let (channel, on) = (body[0], body[1] != 0);
                if code == 4 {
                    Payload::InVariation { channel, on }
                } else {
                    Payload::OutVariation { channel, on }
                }
            }
            6 => {
                need(1 + SAMPLE_BYTES)?;
                Payload::PowerVariation {
                    channel: body[0],
                    sample: decode_sample(&body[1..]),
                }
            }
            7 => {
                need(1)?;
                Payload::MeasureRequest { channel: body[0] }
            }
            8 => {
                need(1)?;
                Payload::AvgMeasureRequest { channel: body[0] }
            }
            other => return Err(BusError::Malformed(format!("unknown frame kind {other}"))),
        };
        Ok(BusFrame::new(BusAddress(sender), BusAddress(recipient), payload))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BusTiming {
    pub baud_rate: f64,
    /// Start + 8 data + stop bits by default.
    pub bits_per_byte: u32,
    /// Constant added after serialization ends.
    pub propagation_s: f64,
    pub max_payload_bytes: usize,
}

impl Default for BusTiming {
    fn default() -> Self {
        BusTiming {
            baud_rate: 9600.0,
            bits_per_byte: 10,
            propagation_s: 0.0,
            max_payload_bytes: 64,
        }
    }
}

impl BusTiming {
    pub fn validate(&self) -> Result<(), BusError> {
        if !(self.baud_rate > 0.0) || !self.baud_rate.is_finite() {
            return Err(BusError::InvalidTiming(format!("baud rate {}", self.baud_rate)));
        }
        if self.bits_per_byte == 0 {
            return Err(BusError::InvalidTiming("zero bits per byte".into()));
        }
        if !(self.propagation_s >= 0.0) {
            return Err(BusError::InvalidTiming(format!("propagation {}", self.propagation_s)));
        }
        Ok(())
    }

    pub fn serialization_time(&self, size_bytes: usize) -> f64 {
        (size_bytes as f64 * self.bits_per_byte as f64) / self.baud_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    Processed,
    Discarded,
}

/// Placement of a frame on the medium, known at transmit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scheduled {
    pub seq: u64,
    pub requested_at: f64,
    pub acquired_at: f64,
    pub occupied_until: f64,
    pub delivered_at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub schedule: Scheduled,
    pub frame: BusFrame,
    /// Every node attached at delivery time, with what it did with the frame.
    pub receivers: Vec<(BusAddress, Disposition)>,
}

impl Delivery {
    pub fn time(&self) -> f64 {
        self.schedule.delivered_at
    }

    pub fn processed_by(&self) -> impl Iterator<Item = BusAddress> + '_ {
        self.receivers
            .iter()
            .filter(|(_, d)| *d == Disposition::Processed)
            .map(|(a, _)| *a)
    }
}

/// Handle returned by [`Bus::attach`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subscription {
    pub address: BusAddress,
}

pub type FrameHandler = Box<dyn FnMut(&Delivery, Disposition) + Send>;

pub struct Bus {
    timing: BusTiming,
    nodes: BTreeMap<BusAddress, Option<FrameHandler>>,
    pending: VecDeque<(Scheduled, BusFrame)>,
    free_at: f64,
    next_seq: u64,
    log: Vec<LogEntry>,
}

impl fmt::Debug for Bus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bus")
            .field("timing", &self.timing)
            .field("nodes", &self.nodes.keys().collect::<Vec<_>>())
            .field("pending", &self.pending.len())
            .field("free_at", &self.free_at)
            .finish()
    }
}

/// One delivered frame in the event log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub time: f64,
    pub sender: BusAddress,
    pub recipient: BusAddress,
    pub kind: FrameKind,
    pub size_bytes: usize,
}

impl Bus {
    pub fn new(timing: BusTiming) -> Result<Self, BusError> {
        timing.validate()?;
        Ok(Bus {
            timing,
            nodes: BTreeMap::new(),
            pending: VecDeque::new(),
            free_at: f64::NEG_INFINITY,
            next_seq: 0,
            log: Vec::new(),
        })
    }

    pub fn timing(&self) -> &BusTiming {
        &self.timing
    }

    /// Attaches a node whose handler is invoked on every delivery.
    pub fn attach<F>(&mut self, address: BusAddress, handler: F) -> Result<Subscription, BusError>
    where
        F: FnMut(&Delivery, Disposition) + Send + 'static,
    {
        self.insert(address, Some(Box::new(handler)))
    }

    /// Attaches a node without a handler; its owner routes the deliveries
    /// returned by [`Bus::deliver_until`].
    pub fn attach_passive(&mut self, address: BusAddress) -> Result<Subscription, BusError> {
        self.insert(address, None)
    }

    fn insert(&mut self, address: BusAddress, handler: Option<FrameHandler>) -> Result<Subscription, BusError> {
        if self.nodes.contains_key(&address) {
            return Err(BusError::DuplicateAddress(address));
        }
        self.nodes.insert(address, handler);
        Ok(Subscription { address })
    }

    pub fn detach(&mut self, subscription: Subscription) {
        self.nodes.remove(&subscription.address);
    }

    pub fn is_attached(&self, address: BusAddress) -> bool {
        self.nodes.contains_key(&address)
    }

    /// Queues a frame. Placement on the medium is fixed immediately.
    pub fn transmit(&mut self, frame: BusFrame, request_time: f64) -> Result<Scheduled, BusError> {
        if !request_time.is_finite() {
            return Err(BusError::InvalidTime(request_time));
        }
        if !self.nodes.contains_key(&frame.sender) {
            return Err(BusError::DetachedSender(frame.sender));
        }
        let size = frame.payload.len();
        if size > self.timing.max_payload_bytes {
            return Err(BusError::OversizedPayload {
                size,
                max: self.timing.max_payload_bytes,
            });
        }
        let acquired_at = request_time.max(self.free_at);
        let occupied_until = acquired_at + self.timing.serialization_time(frame.size_bytes());
        self.free_at = occupied_until;
        let schedule = Scheduled {
            seq: self.next_seq,
            requested_at: request_time,
            acquired_at,
            occupied_until,
            delivered_at: occupied_until + self.timing.propagation_s,
        };
        self.next_seq += 1;
        self.pending.push_back((schedule, frame));
        Ok(schedule)
    }

    pub fn next_delivery_time(&self) -> Option<f64> {
        self.pending.front().map(|(s, _)| s.delivered_at)
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Delivers, in FIFO order, every frame due at or before `t`.
    pub fn deliver_until(&mut self, t: f64) -> Vec<Delivery> {
        let mut out = Vec::new();
        while let Some(delivery) = self.deliver_next_until(t) {
            out.push(delivery);
        }
        out
    }

    /// Delivers the next frame if it is due at or before `t`.
    pub fn deliver_next_until(&mut self, t: f64) -> Option<Delivery> {
        if self.pending.front().is_none_or(|(s, _)| s.delivered_at > t) {
            return None;
        }
        let (schedule, frame) = self.pending.pop_front()?;
        let receivers = self
            .nodes
            .keys()
            .map(|&addr| {
                let d = if addr == frame.recipient || addr == BusAddress::GATEWAY {
                    Disposition::Processed
                } else {
                    Disposition::Discarded
                };
                (addr, d)
            })
            .collect();
        let delivery = Delivery {
            schedule,
            frame,
            receivers,
        };
        for (addr, handler) in self.nodes.iter_mut() {
            if let Some(h) = handler {
                let d = delivery
                    .receivers
                    .iter()
                    .find(|(a, _)| a == addr)
                    .map(|(_, d)| *d)
                    .unwrap_or(Disposition::Discarded);
                h(&delivery, d);
            }
        }
        self.log.push(LogEntry {
            time: schedule.delivered_at,
            sender: delivery.frame.sender,
            recipient: delivery.frame.recipient,
            kind: delivery.frame.kind(),
            size_bytes: delivery.frame.size_bytes(),
        });
        Some(delivery)
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// Event log as `time_s,sender,recipient,kind,size_bytes`.
    pub fn write_log<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_log_entries(&self.log, w)
    }
}

/// Writes log entries as `time_s,sender,recipient,kind,size_bytes`.
pub fn write_log_entries<W: Write>(entries: &[LogEntry], mut w: W) -> std::io::Result<()> {
    writeln!(w, "time_s,sender,recipient,kind,size_bytes")?;
    for e in entries {
        writeln!(
            w,
            "{:.6},{},{},{},{}",
            e.time, e.sender, e.recipient, e.kind, e.size_bytes
        )?;
    }
    Ok(())
}

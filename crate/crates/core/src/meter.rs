//! Emulated metering unit: 8 relay outputs with per-channel metering, 16 dry
//! contact inputs, spontaneous power notifications and average-with-reset
//! accounting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::{BusAddress, BusFrame, ChannelKind, Command, Payload};
use crate::electrical::MeasureSample;

pub const OUTPUTS: usize = 8;
pub const INPUTS: usize = 16;
pub const MAX_CURRENT_A: f64 = 16.0;
pub const DEFAULT_SELF_DRAW_W: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeterError {
    #[error("{kind:?} channel index {index} out of range")]
    ChannelRange { kind: ChannelKind, index: usize },
    #[error("output channel {0} is tripped")]
    Tripped(usize),
    #[error("invalid notification mode: {0}")]
    InvalidMode(String),
}

/// Spontaneous notification policy; a unit runs exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NotificationMode {
    /// Notify every `period` seconds.
    Interval(f64),
    /// Notify when any of P, PF, C moves more than this from the last sent value.
    AbsoluteDelta(f64),
    /// Notify when any of P, PF, C moves more than this percentage of the last sent value.
    PercentDelta(f64),
}

impl NotificationMode {
    pub fn validate(&self) -> Result<(), MeterError> {
        let (ok, what) = match *self {
            NotificationMode::Interval(p) => (p > 0.0, "interval period must be > 0"),
            NotificationMode::AbsoluteDelta(t) => (t > 0.0, "absolute threshold must be > 0"),
            NotificationMode::PercentDelta(p) => (p > 0.0 && p <= 100.0, "percentage must be in (0, 100]"),
        };
        if ok {
            Ok(())
        } else {
            Err(MeterError::InvalidMode(what.into()))
        }
    }
}

/// Running sums since the last averaged read.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AveragingAccumulator {
    pub sum_p: f64,
    pub sum_pf: f64,
    pub sum_c: f64,
    pub count: u64,
    pub window_start: f64,
}

impl AveragingAccumulator {
    pub fn push(&mut self, s: &MeasureSample) {
        self.sum_p += s.apparent_power;
        self.sum_pf += s.power_factor;
        self.sum_c += s.current;
        self.count += 1;
    }

    pub fn mean(&self) -> Option<MeasureSample> {
        (self.count > 0).then(|| {
            let n = self.count as f64;
            MeasureSample {
                apparent_power: self.sum_p / n,
                power_factor: self.sum_pf / n,
                current: self.sum_c / n,
            }
        })
    }

    pub fn reset(&mut self, now: f64) {
        *self = AveragingAccumulator {
            window_start: now,
            ..Default::default()
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputChannel {
    pub index: usize,
    pub relay_on: bool,
    pub tripped: bool,
    /// Most recent reading of the attached load.
    pub instantaneous: MeasureSample,
    /// Value carried by the last powerVariation frame.
    pub last_sent: MeasureSample,
    pub last_emit: Option<f64>,
    pub accumulator: AveragingAccumulator,
    pub max_current: f64,
}

impl OutputChannel {
    fn new(index: usize) -> Self {
        OutputChannel {
            index,
            relay_on: false,
            tripped: false,
            instantaneous: MeasureSample::ZERO,
            last_sent: MeasureSample::ZERO,
            last_emit: None,
            accumulator: AveragingAccumulator::default(),
            max_current: MAX_CURRENT_A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InputChannel {
    pub index: usize,
    pub state: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripEvent {
    pub channel: usize,
    pub current: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlAck {
    pub channel: usize,
    pub on: bool,
    /// outVariation, present only when the relay actually changed.
    pub variation: Option<BusFrame>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleOutcome {
    pub trip: Option<TripEvent>,
    pub frames: Vec<BusFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterUnit {
    pub address: BusAddress,
    pub outputs: Vec<OutputChannel>,
    pub inputs: Vec<InputChannel>,
    pub notify_mode: NotificationMode,
    pub self_draw_w: f64,
    /// Where spontaneous notifications are addressed.
    pub report_to: BusAddress,
}

impl MeterUnit {
    pub fn new(address: BusAddress, notify_mode: NotificationMode) -> Result<Self, MeterError> {
        notify_mode.validate()?;
        Ok(MeterUnit {
            address,
            outputs: (0..OUTPUTS).map(OutputChannel::new).collect(),
            inputs: (0..INPUTS).map(|index| InputChannel { index, state: false }).collect(),
            notify_mode,
            self_draw_w: DEFAULT_SELF_DRAW_W,
            report_to: BusAddress::GATEWAY,
        })
    }

    fn out_index(&self, index: usize) -> Result<usize, MeterError> {
        if index < OUTPUTS {
            Ok(index)
        } else {
            Err(MeterError::ChannelRange {
                kind: ChannelKind::Out,
                index,
            })
        }
    }

    fn frame(&self, payload: Payload) -> BusFrame {
        BusFrame::new(self.address, self.report_to, payload)
    }

    fn out_variation(&self, index: usize) -> BusFrame {
        self.frame(Payload::OutVariation {
            channel: index as u8,
            on: self.outputs[index].relay_on,
        })
    }

    /// Switches an output. A changed state emits an outVariation frame; turning
    /// a tripped channel on re-arms it.
    pub fn control_out(&mut self, index: usize, on: bool) -> Result<ControlAck, MeterError> {
        let i = self.out_index(index)?;
        let ch = &mut self.outputs[i];
        if on {
            ch.tripped = false;
        }
        let changed = ch.relay_on != on;
        ch.relay_on = on;
        if !on {
            ch.instantaneous = MeasureSample::ZERO;
        }
        Ok(ControlAck {
            channel: i,
            on,
            variation: changed.then(|| self.out_variation(i)),
        })
    }

    pub fn read_state(&self, kind: ChannelKind, index: usize) -> Result<bool, MeterError> {
        match kind {
            ChannelKind::Out => Ok(self.outputs[self.out_index(index)?].relay_on),
            ChannelKind::In => self
                .inputs
                .get(index)
                .map(|c| c.state)
                .ok_or(MeterError::ChannelRange { kind, index }),
        }
    }

    /// Drives a dry-contact input; a change emits an inVariation frame.
    pub fn set_input(&mut self, index: usize, state: bool) -> Result<Option<BusFrame>, MeterError> {
        let input = self.inputs.get_mut(index).ok_or(MeterError::ChannelRange {
            kind: ChannelKind::In,
            index,
        })?;
        if input.state == state {
            return Ok(None);
        }
        input.state = state;
        Ok(Some(self.frame(Payload::InVariation {
            channel: index as u8,
            on: state,
        })))
    }

    pub fn read_measures(&self, index: usize) -> Result<MeasureSample, MeterError> {
        let ch = &self.outputs[self.out_index(index)?];
        if ch.tripped {
            return Err(MeterError::Tripped(index));
        }
        Ok(if ch.relay_on {
            ch.instantaneous
        } else {
            MeasureSample::ZERO
        })
    }

    /// Means since the window start, then resets the window. An empty window
    /// returns the instantaneous sample.
    pub fn read_avg_measures(&mut self, index: usize, now: f64) -> Result<MeasureSample, MeterError> {
        let i = self.out_index(index)?;
        let instantaneous = if self.outputs[i].relay_on {
            self.outputs[i].instantaneous
        } else {
            MeasureSample::ZERO
        };
        let acc = &mut self.outputs[i].accumulator;
        let avg = acc.mean().unwrap_or(instantaneous);
        acc.reset(now);
        Ok(avg)
    }

    /// Applies the configured notification rule to a fresh sample.
    pub fn evaluate_notification(&mut self, index: usize, sample: &MeasureSample, now: f64) -> Option<BusFrame> {
        let i = self.out_index(index).ok()?;
        let ch = &self.outputs[i];
        let last = ch.last_sent;
        let pairs = [
            (sample.apparent_power, last.apparent_power),
            (sample.power_factor, last.power_factor),
            (sample.current, last.current),
        ];
        let emit = match self.notify_mode {
            NotificationMode::Interval(period) => ch.last_emit.is_none_or(|t| now - t >= period),
            NotificationMode::AbsoluteDelta(threshold) => pairs.iter().any(|(new, old)| (new - old).abs() > threshold),
            NotificationMode::PercentDelta(percent) => pairs.iter().any(|&(new, old)| {
                if old == 0.0 {
                    new != 0.0
                } else {
                    (new - old).abs() > percent / 100.0 * old.abs()
                }
            }),
        };
        if !emit {
            return None;
        }
        let ch = &mut self.outputs[i];
        ch.last_sent = *sample;
        ch.last_emit = Some(now);
        Some(self.frame(Payload::PowerVariation {
            channel: i as u8,
            sample: *sample,
        }))
    }

    /// Opens the relay of a channel whose current exceeds its rating.
    pub fn trip_check(&mut self, index: usize, current: f64) -> Option<TripEvent> {
        let i = self.out_index(index).ok()?;
        let ch = &mut self.outputs[i];
        if !ch.relay_on || current <= ch.max_current {
            return None;
        }
        ch.relay_on = false;
        ch.tripped = true;
        ch.instantaneous = MeasureSample::ZERO;
        log::warn!("meter {} channel {} tripped at {:.2} A", self.address, i, current);
        Some(TripEvent { channel: i, current })
    }

    /// One sampling tick of the load attached to `index`. An open relay
    /// measures nothing.
    pub fn sample(&mut self, index: usize, load: &MeasureSample, now: f64) -> Result<SampleOutcome, MeterError> {
        let i = self.out_index(index)?;
        let mut outcome = SampleOutcome::default();
        if self.outputs[i].relay_on {
            if let Some(trip) = self.trip_check(i, load.current) {
                outcome.trip = Some(trip);
                outcome.frames.push(self.out_variation(i));
            }
        }
        let measured = if self.outputs[i].relay_on {
            *load
        } else {
            MeasureSample::ZERO
        };
        let ch = &mut self.outputs[i];
        ch.instantaneous = measured;
        ch.accumulator.push(&measured);
        if let Some(f) = self.evaluate_notification(i, &measured, now) {
            outcome.frames.push(f);
        }
        Ok(outcome)
    }

    /// Processes a frame addressed to this unit and returns the replies it
    /// puts on the bus.
    pub fn handle_frame(&mut self, frame: &BusFrame, now: f64) -> Result<Vec<BusFrame>, MeterError> {
        if frame.recipient != self.address {
            return Ok(Vec::new());
        }
        let reply_to = frame.sender;
        let reply = |unit: &MeterUnit, payload| BusFrame::new(unit.address, reply_to, payload);
        let out = match frame.payload {
            Payload::Command(Command::ControlOut { channel, on }) => {
                self.control_out(channel as usize, on)?.variation.into_iter().collect()
            }
            Payload::Command(Command::ReadOutState { channel }) => {
                let on = self.read_state(ChannelKind::Out, channel as usize)?;
                vec![reply(
                    self,
                    Payload::StateReply {
                        kind: ChannelKind::Out,
                        channel,
                        on,
                    },
                )]
            }
            Payload::Command(Command::ReadInState { channel }) => {
                let on = self.read_state(ChannelKind::In, channel as usize)?;
                vec![reply(
                    self,
                    Payload::StateReply {
                        kind: ChannelKind::In,
                        channel,
                        on,
                    },
                )]
            }
            Payload::MeasureRequest { channel } => {
                let sample = self.read_measures(channel as usize)?;
                vec![reply(
                    self,
                    Payload::MeasureReply {
                        channel,
                        averaged: false,
                        sample,
                    },
                )]
            }
            Payload::AvgMeasureRequest { channel } => {
                let sample = self.read_avg_measures(channel as usize, now)?;
                vec![reply(
                    self,
                    Payload::MeasureReply {
                        channel,
                        averaged: true,
                        sample,
                    },
                )]
            }
            _ => Vec::new(),
        };
        Ok(out)
    }

    /// Loss of supply: volatile measurement state is lost, latching relays
    /// keep their contacts.
    pub fn power_loss(&mut self, now: f64) {
        for ch in &mut self.outputs {
            ch.instantaneous = MeasureSample::ZERO;
            ch.accumulator.reset(now);
            ch.last_emit = None;
        }
    }
}

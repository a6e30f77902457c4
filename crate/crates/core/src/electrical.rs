//! Electrical quantities reported by the meters and the measures derived from
//! them on the gateway side.
//!
//! Meters only ever report apparent power, power factor and current. Voltage,
//! active power and reactive power are reconstructed from those three values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Nominal mains voltage of the metered network (230 V, 50 Hz).
pub const NOMINAL_VOLTAGE: f64 = 230.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElectricalError {
    #[error("power factor {0} outside [0, 1]")]
    PowerFactorDomain(f64),
    #[error("negative or non-finite quantity: {0}")]
    NegativeQuantity(f64),
    #[error("zero current with nonzero apparent power {0} VA")]
    InvalidSample(f64),
    #[error("voltage undefined for a zero-current sample")]
    VoltageUndefined,
    #[error("TRMS of an empty waveform")]
    EmptyWaveform,
}

/// One meter reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSample {
    /// Apparent power in VA.
    pub apparent_power: f64,
    /// cos φ in [0, 1].
    pub power_factor: f64,
    /// RMS current in A.
    pub current: f64,
}

impl MeasureSample {
    /// Open circuit: no power, no current, unity power factor.
    pub const ZERO: MeasureSample = MeasureSample {
        apparent_power: 0.0,
        power_factor: 1.0,
        current: 0.0,
    };

    pub fn new(apparent_power: f64, power_factor: f64, current: f64) -> Result<Self, ElectricalError> {
        let sample = MeasureSample {
            apparent_power,
            power_factor,
            current,
        };
        sample.validate()?;
        Ok(sample)
    }

    /// Sample of a load drawing `active_w` at the given power factor on a
    /// `voltage` supply.
    pub fn from_load(active_w: f64, power_factor: f64, voltage: f64) -> Result<Self, ElectricalError> {
        if !(power_factor > 0.0 && power_factor <= 1.0) {
            return Err(ElectricalError::PowerFactorDomain(power_factor));
        }
        if !(active_w >= 0.0) || !active_w.is_finite() {
            return Err(ElectricalError::NegativeQuantity(active_w));
        }
        if active_w == 0.0 {
            return Ok(MeasureSample::ZERO);
        }
        let apparent = active_w / power_factor;
        MeasureSample::new(apparent, power_factor, apparent / voltage)
    }

    pub fn validate(&self) -> Result<(), ElectricalError> {
        for q in [self.apparent_power, self.current] {
            if !(q >= 0.0) || !q.is_finite() {
                return Err(ElectricalError::NegativeQuantity(q));
            }
        }
        if !(0.0..=1.0).contains(&self.power_factor) {
            return Err(ElectricalError::PowerFactorDomain(self.power_factor));
        }
        if self.current == 0.0 && self.apparent_power > 0.0 {
            return Err(ElectricalError::InvalidSample(self.apparent_power));
        }
        Ok(())
    }
}

/// Quantities the gateway reconstructs from a [`MeasureSample`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedMeasures {
    pub voltage: f64,
    pub active_power: f64,
    pub reactive_power: f64,
}

/// V = P / I, Pa = P·PF, Pr = √(P² − Pa²).
pub fn derive_measures(sample: &MeasureSample) -> Result<DerivedMeasures, ElectricalError> {
    sample.validate()?;
    if sample.current == 0.0 {
        return Err(ElectricalError::VoltageUndefined);
    }
    Ok(powers(sample, sample.apparent_power / sample.current))
}

/// Like [`derive_measures`] but falls back to [`NOMINAL_VOLTAGE`] when the
/// current is zero, e.g. after wire quantization of a tiny load.
pub fn derive_measures_or_nominal(sample: &MeasureSample) -> Result<DerivedMeasures, ElectricalError> {
    if !(0.0..=1.0).contains(&sample.power_factor) {
        return Err(ElectricalError::PowerFactorDomain(sample.power_factor));
    }
    for q in [sample.apparent_power, sample.current] {
        if !(q >= 0.0) || !q.is_finite() {
            return Err(ElectricalError::NegativeQuantity(q));
        }
    }
    let voltage = if sample.current > 0.0 {
        sample.apparent_power / sample.current
    } else {
        NOMINAL_VOLTAGE
    };
    Ok(powers(sample, voltage))
}

fn powers(sample: &MeasureSample, voltage: f64) -> DerivedMeasures {
    let p = sample.apparent_power;
    let active = p * sample.power_factor;
    // P·√(1 − PF²) avoids the cancellation in √(P² − Pa²) near unity PF.
    let reactive = p * (1.0 - sample.power_factor * sample.power_factor).max(0.0).sqrt();
    DerivedMeasures {
        voltage,
        active_power: active,
        reactive_power: reactive,
    }
}

/// Raw instantaneous readings of one waveform, at least one value.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSamples {
    values: Vec<f64>,
}

impl WaveformSamples {
    pub fn new(values: Vec<f64>) -> Result<Self, ElectricalError> {
        if values.is_empty() {
            return Err(ElectricalError::EmptyWaveform);
        }
        Ok(WaveformSamples { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }
}

/// True RMS: √(Σ yᵢ² / n).
pub fn trms(samples: &WaveformSamples) -> f64 {
    let sum_sq: f64 = samples.values.iter().map(|y| y * y).sum();
    (sum_sq / samples.count() as f64).sqrt()
}

/// [`trms`] over a plain slice.
pub fn trms_of(values: &[f64]) -> Result<f64, ElectricalError> {
    if values.is_empty() {
        return Err(ElectricalError::EmptyWaveform);
    }
    let sum_sq: f64 = values.iter().map(|y| y * y).sum();
    Ok((sum_sq / values.len() as f64).sqrt())
}

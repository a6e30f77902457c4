//! True-RMS of a sampled mains waveform and the quantities the gateway
//! rebuilds from a meter reading.
//!
//!     cargo run --example derive_measures

use std::f64::consts::PI;

use oswitch::electrical::{derive_measures, trms, MeasureSample, WaveformSamples};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 200;
    let peak = 325.0;
    let wave = WaveformSamples::new((0..n).map(|k| peak * (2.0 * PI * k as f64 / n as f64).sin()).collect())?;
    println!(
        "sine peak {peak} V -> TRMS {:.3} V (peak/sqrt2 = {:.3})",
        trms(&wave),
        peak / 2f64.sqrt()
    );

    let clipped = WaveformSamples::new(wave.values().iter().map(|v| v.clamp(-250.0, 250.0)).collect())?;
    println!("clipped at 250 V -> TRMS {:.3} V", trms(&clipped));

    println!(
        "\n{:>10} {:>5} {:>7} {:>9} {:>9} {:>10}",
        "apparent", "pf", "current", "voltage", "active", "reactive"
    );
    for (va, pf, amps) in [
        (230.0, 1.0, 1.0),
        (460.0, 0.8, 2.0),
        (1150.0, 0.5, 5.0),
        (69.0, 0.95, 0.3),
    ] {
        let d = derive_measures(&MeasureSample::new(va, pf, amps)?)?;
        println!(
            "{:>10.1} {:>5.2} {:>7.2} {:>9.2} {:>9.2} {:>10.2}",
            va, pf, amps, d.voltage, d.active_power, d.reactive_power
        );
    }
    Ok(())
}

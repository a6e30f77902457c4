//! One load ramp seen through the three notification modes, plus window
//! averaging and the overcurrent trip.
//!
//!     cargo run --example meter_notifications

use oswitch::bus::BusAddress;
use oswitch::electrical::MeasureSample;
use oswitch::meter::{MeterUnit, NotificationMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ramp: Vec<(f64, f64)> = (0..=12)
        .map(|k| (10.0 * k as f64, 100.0 + 4.0 * (k * k) as f64))
        .collect();
    for mode in [
        NotificationMode::Interval(30.0),
        NotificationMode::AbsoluteDelta(25.0),
        NotificationMode::PercentDelta(20.0),
    ] {
        let mut unit = MeterUnit::new(BusAddress(1), mode)?;
        unit.control_out(0, true)?;
        let mut sent = Vec::new();
        for &(t, w) in &ramp {
            if !unit
                .sample(0, &MeasureSample::from_load(w, 1.0, 230.0)?, t)?
                .frames
                .is_empty()
            {
                sent.push(format!("{t:.0}s:{w:.0}W"));
            }
        }
        println!("{mode:?}: {} frames  {}", sent.len(), sent.join(" "));
    }

    let mut unit = MeterUnit::new(BusAddress(1), NotificationMode::Interval(3600.0))?;
    unit.control_out(0, true)?;
    for (t, w) in [(0.0, 100.0), (1.0, 200.0), (2.0, 300.0)] {
        unit.sample(0, &MeasureSample::from_load(w, 1.0, 230.0)?, t)?;
    }
    println!("\nwindow mean {:.1} VA", unit.read_avg_measures(0, 3.0)?.apparent_power);
    println!(
        "empty window falls back to {:.1} VA",
        unit.read_avg_measures(0, 4.0)?.apparent_power
    );

    let heater = MeasureSample::from_load(4000.0, 1.0, 230.0)?;
    let outcome = unit.sample(0, &heater, 5.0)?;
    println!(
        "\n4000 W load draws {:.1} A: trip {:?}, relay now {}",
        heater.current,
        outcome.trip.map(|t| t.current),
        unit.outputs[0].relay_on
    );
    Ok(())
}

//! Frame sizes and medium occupancy at 9600 baud, and how back-to-back
//! transmissions queue behind each other.
//!
//!     cargo run --example bus_timing

use oswitch::bus::{Bus, BusAddress, BusFrame, BusTiming, Command, Payload};
use oswitch::electrical::MeasureSample;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let timing = BusTiming {
        propagation_s: 0.001,
        ..BusTiming::default()
    };
    let gw = BusAddress::GATEWAY;
    let unit = BusAddress(1);
    let frames = [
        BusFrame::new(gw, unit, Payload::Command(Command::ControlOut { channel: 0, on: true })),
        BusFrame::new(unit, gw, Payload::OutVariation { channel: 0, on: true }),
        BusFrame::new(gw, unit, Payload::AvgMeasureRequest { channel: 0 }),
        BusFrame::new(
            unit,
            gw,
            Payload::PowerVariation {
                channel: 0,
                sample: MeasureSample::from_load(120.0, 0.9, 230.0)?,
            },
        ),
    ];
    println!("{:<18} {:>6} {:>10}", "frame", "bytes", "ms");
    for f in &frames {
        println!(
            "{:<18} {:>6} {:>10.4}",
            f.kind().name(),
            f.size_bytes(),
            1e3 * timing.serialization_time(f.size_bytes())
        );
    }

    let mut bus = Bus::new(timing)?;
    bus.attach_passive(gw)?;
    bus.attach_passive(unit)?;
    println!("\nall four requested at t = 0:");
    for f in frames {
        let s = bus.transmit(f, 0.0)?;
        println!(
            "  #{} on the wire {:.4}..{:.4} ms, delivered {:.4} ms",
            s.seq,
            1e3 * s.acquired_at,
            1e3 * s.occupied_until,
            1e3 * s.delivered_at
        );
    }
    for d in bus.deliver_until(f64::INFINITY) {
        println!(
            "  delivered #{} {} to {:?}",
            d.schedule.seq,
            d.frame.kind().name(),
            d.processed_by().collect::<Vec<_>>()
        );
    }
    Ok(())
}

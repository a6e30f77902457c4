//! A gateway and one metering unit on a shared bus: a relay command, the
//! state variation it triggers, power notifications and a history query.
//!
//!     cargo run --example gateway_supervision

use oswitch::bus::{Bus, BusAddress, BusTiming, ChannelKind};
use oswitch::electrical::MeasureSample;
use oswitch::gateway::{DeviceEntry, DeviceRegistry, Gateway, GatewayEvent};
use oswitch::meter::{MeterUnit, NotificationMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut registry = DeviceRegistry::new();
    registry.register(DeviceEntry {
        name: "heater".into(),
        address: BusAddress(1),
        channel: 0,
        kind: ChannelKind::Out,
        interruptible: true,
    })?;
    let mut gateway = Gateway::new(registry);
    gateway.subscribe(|ev| match ev {
        GatewayEvent::StateChanged { name, on, time } => {
            println!("  {time:8.4}s  {name} -> {}", if *on { "on" } else { "off" })
        }
        GatewayEvent::Measurement { name, row } => {
            println!("  {:8.4}s  {name} {:.0} W", row.time, row.derived.active_power)
        }
    });
    let mut unit = MeterUnit::new(BusAddress(1), NotificationMode::AbsoluteDelta(50.0))?;
    let mut bus = Bus::new(BusTiming::default())?;
    bus.attach_passive(BusAddress::GATEWAY)?;
    bus.attach_passive(unit.address)?;

    let pump = |bus: &mut Bus,
                gateway: &mut Gateway,
                unit: &mut MeterUnit,
                until: f64|
     -> Result<(), Box<dyn std::error::Error>> {
        while let Some(d) = bus.deliver_next_until(until) {
            gateway.handle_frame(&d.frame, d.time());
            if d.frame.recipient == unit.address {
                for reply in unit.handle_frame(&d.frame, d.time())? {
                    bus.transmit(reply, d.time())?;
                }
            }
        }
        Ok(())
    };

    println!("events:");
    gateway.send_command(&mut bus, "heater", true, 0.0)?;
    pump(&mut bus, &mut gateway, &mut unit, 1.0)?;
    for (t, w) in [(10.0, 1200.0), (20.0, 1220.0), (30.0, 800.0), (40.0, 1500.0)] {
        for f in unit.sample(0, &MeasureSample::from_load(w, 1.0, 230.0)?, t)?.frames {
            bus.transmit(f, t)?;
        }
        pump(&mut bus, &mut gateway, &mut unit, t + 1.0)?;
    }
    gateway.send_command(&mut bus, "heater", false, 50.0)?;
    pump(&mut bus, &mut gateway, &mut unit, 51.0)?;

    println!("\nmirrored state: {:?}", gateway.state("heater"));
    println!("10 s buckets:");
    for b in gateway.query_history("heater", 0.0, 60.0, 10.0)? {
        println!("  {:>4.0}s  {:7.1} W", b.start, b.mean_active_w);
    }
    println!("frames seen: {}", gateway.raw_log().len());
    Ok(())
}

//! Inverter energy split over a sunny day: solar first, then battery, then
//! grid, with surplus charging the battery.
//!
//!     cargo run --example inverter_priority

use std::f64::consts::PI;

use oswitch::inverter::{Inverter, InverterConfig};
use oswitch::series::StepSeries;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pts: Vec<(f64, f64)> = (0..24)
        .map(|h| {
            let x = (h as f64 + 0.5 - 6.0) / 13.0;
            let dc = if (0.0..1.0).contains(&x) {
                220.0 * (PI * x).sin()
            } else {
                0.0
            };
            (h as f64 * 3600.0, dc.round())
        })
        .collect();
    let config = InverterConfig {
        battery_capacity_wh: 300.0,
        ..InverterConfig::default()
    };
    let mut inv = Inverter::new(config, StepSeries::new(pts, 86_400.0)?)?;
    let load = |h: usize| {
        if (7..9).contains(&h) || (18..23).contains(&h) {
            250.0
        } else {
            90.0
        }
    };
    println!(
        "{:>4} {:>6} {:>6} {:>6} {:>7} {:>8} {:>6} {:>8} {:>8}",
        "hour", "dc", "avail", "load", "solar", "battery", "grid", "charge", "level"
    );
    let mut total = [0.0; 3];
    for h in 0..24 {
        let available = inv.read_production(h as f64 * 3600.0)?;
        let dc = inv.state.current_dc_w;
        let step = inv.step_energy(3600.0, load(h));
        total[0] += step.served_by_solar;
        total[1] += step.served_by_battery;
        total[2] += step.served_by_grid;
        println!(
            "{:>4} {:>6.0} {:>6.0} {:>6.0} {:>7.1} {:>8.1} {:>6.1} {:>8.1} {:>8.1}",
            h,
            dc,
            available,
            load(h),
            step.served_by_solar,
            step.served_by_battery,
            step.served_by_grid,
            step.battery_charge,
            inv.state.battery_level_wh
        );
    }
    println!(
        "\nsolar {:.0} Wh, battery {:.0} Wh, grid {:.0} Wh",
        total[0], total[1], total[2]
    );
    Ok(())
}

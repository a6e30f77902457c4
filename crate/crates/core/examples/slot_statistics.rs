//! Per-slot load statistics over a week of traces and the per-outlet
//! eligibility they give the variance policies at a few times of day.
//!
//!     cargo run --example slot_statistics [scenario.toml]

use std::collections::BTreeSet;
use std::path::PathBuf;

use oswitch::optimizer::OutletId;
use oswitch::policy::{eligible, normalized_metric, PolicyKind};
use oswitch::sim::{self, Scenario};
use oswitch::slotstats::MetricKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/reference.toml")));
    let sc = Scenario::load(&path, None)?;
    let stats = sim::replay_stats(&sc)?;
    let names: Vec<&str> = sc.outlet_names().collect();
    let outlets: BTreeSet<OutletId> = (0..names.len() as u32).map(OutletId).collect();
    let slot_h = stats.grid().slot_seconds() / 3600.0;
    let policy = PolicyKind::AdaptiveVariance {
        margin_min: 0.05,
        margin_max: 0.4,
    };
    for hour in [3.0, 8.0, 12.5, 20.0] {
        let slot = (hour / slot_h) as usize;
        println!("{hour:>5.1} h (slot {slot}):");
        for &o in &outlets {
            let c = stats.cell(o, slot);
            println!(
                "    {:<10} mean {:7.1} W  var {:10.1} W²  normalized {:.3}",
                names[o.0 as usize],
                c.mean,
                c.variance().unwrap_or(0.0),
                normalized_metric(&stats, o, slot, MetricKind::Variance)
            );
        }
        let (allowed, margin) = eligible(&policy, &stats, slot, &outlets);
        println!(
            "    adaptive margin {margin:.3}, eligible: {}",
            allowed
                .iter()
                .map(|o| names[o.0 as usize])
                .collect::<Vec<_>>()
                .join(" ")
        );
    }
    Ok(())
}

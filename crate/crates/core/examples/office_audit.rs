//! Office audit: generate a week of office lines, then report per-day cost,
//! baseline, closing-hours load and the interruptible share.
//!
//!     cargo run --example office_audit [tariff_per_kwh]

use std::path::Path;

use oswitch::audit::{self, AuditLine, ClosingSchedule};
use oswitch::gateway::DeviceRegistry;
use oswitch::sim::TraceSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tariff: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(audit::DEFAULT_TARIFF);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/office");
    let spec = TraceSpec::from_toml(&std::fs::read_to_string(dir.join("traces.toml"))?)?;
    let registry = DeviceRegistry::read_from(std::fs::read(dir.join("registry.csv"))?.as_slice())?;
    let schedule = ClosingSchedule::read_from(std::fs::read(dir.join("schedule.csv"))?.as_slice())?;
    let lines = spec
        .generate(3)?
        .outlets
        .into_iter()
        .map(|t| {
            let entry = registry
                .get(&t.name)
                .ok_or_else(|| format!("{} is not registered", t.name))?;
            Ok(AuditLine {
                name: t.name,
                interruptible: entry.interruptible,
                trace: t.series,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let report = audit::audit(&lines, &schedule, tariff)?;
    audit::write_days_csv(&report.profile, std::io::stdout().lock())?;
    println!();
    audit::write_lines_csv(&report, std::io::stdout().lock())?;
    println!();
    audit::write_summary(&report, std::io::stdout().lock())?;
    Ok(())
}

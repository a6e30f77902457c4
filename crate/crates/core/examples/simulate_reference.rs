//! Runs one scenario end to end and writes its artifacts.
//!
//!     cargo run --release --example simulate_reference [scenario.toml] [out_dir]

use std::path::PathBuf;

use oswitch::sim::{self, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/reference.toml")));
    let out_dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("oswitch-reference"));
    let sc = Scenario::load(&path, None)?;
    let out = sim::run(&sc)?;
    sim::write_summary(&out.report, std::io::stdout().lock())?;
    println!("\nproduction used  {:.2} %", out.report.production_used_percent());
    for lack in out.lacks.iter().take(5) {
        println!(
            "lack at {:.1} s: {:.0} W on PV, {:.0} W available",
            lack.time, lack.pv_demand_w, lack.available_w
        );
    }
    std::fs::create_dir_all(&out_dir)?;
    sim::write_run_artifacts(&out, &out_dir)?;
    println!("artifacts in {}", out_dir.display());
    Ok(())
}

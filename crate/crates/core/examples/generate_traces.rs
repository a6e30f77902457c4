//! Synthetic household traces from a spec, written as CSV and summarised.
//!
//!     cargo run --example generate_traces [seed] [out_dir]

use oswitch::sim::{generate_traces, Scenario, TraceSource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let out_dir = args
        .next()
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("oswitch-traces"));
    let reference = Scenario::load(
        concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/reference.toml").as_ref(),
        None,
    )?;
    let TraceSource::Generated(spec) = reference.source else {
        return Err("reference scenario no longer generates its traces".into());
    };
    let set = generate_traces(&spec, seed, &out_dir)?;
    let end = spec.horizon_s();
    println!("{:<10} {:>8} {:>10} {:>10}", "trace", "changes", "kWh", "peak W");
    for t in &set.outlets {
        let peak = t.series.values().iter().copied().fold(0.0, f64::max);
        println!(
            "{:<10} {:>8} {:>10.2} {:>10.0}",
            t.name,
            t.series.len(),
            t.series.integral(0.0, end) / 3.6e6,
            peak
        );
    }
    println!(
        "{:<10} {:>8} {:>10.2}",
        "pv (dc)",
        set.pv.len(),
        set.pv.integral(0.0, end) / 3.6e6
    );
    println!("written to {}", out_dir.display());
    Ok(())
}

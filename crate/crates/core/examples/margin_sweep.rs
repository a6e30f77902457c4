//! Safety-margin sweep of the static variance policy on the reference
//! household: fewer energy lacks as the margin grows, at some cost in saving.
//!
//!     cargo run --release --example margin_sweep

use oswitch::policy::PolicyKind;
use oswitch::sim::{self, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/reference.toml");
    let scenario = Scenario::load(path.as_ref(), None)?.with_policy(PolicyKind::StaticVariance {
        threshold_w2: 500.0,
        margin: 0.0,
    });
    let rows = sim::sweep(&scenario, &[0.0, 0.1, 0.2, 0.3, 0.4])?;
    sim::write_report_csv(&rows, std::io::stdout().lock())?;
    Ok(())
}

//! Runs the reference household under all five switching logics.
//!
//!     cargo run --release --example policy_comparison [scenario.toml]

use std::path::PathBuf;

use oswitch::policy::PolicyKind;
use oswitch::sim::{self, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/reference.toml")));
    let base = Scenario::load(&path, None)?;
    let policies = [
        PolicyKind::Naive { margin: 0.0 },
        PolicyKind::StaticVariance {
            threshold_w2: 500.0,
            margin: 0.2,
        },
        PolicyKind::StaticVarianceMeanRatio {
            threshold_ratio: 5.0,
            margin: 0.2,
        },
        PolicyKind::AdaptiveVariance {
            margin_min: 0.05,
            margin_max: 0.4,
        },
        PolicyKind::AdaptiveVarianceMeanRatio {
            margin_min: 0.05,
            margin_max: 0.4,
        },
    ];
    println!(
        "{:<18} {:>7} {:>9} {:>7} {:>9}",
        "policy", "margin", "saving%", "errors", "switches"
    );
    for p in policies {
        let out = sim::run(&base.with_policy(p))?;
        let r = &out.report;
        println!(
            "{:<18} {:>7.3} {:>9.2} {:>7} {:>9}",
            r.policy,
            r.margin,
            r.saving_percent(),
            r.error_count,
            r.switch_count
        );
    }
    Ok(())
}

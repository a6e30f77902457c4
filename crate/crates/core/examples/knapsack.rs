//! Choosing which outlets go on PV: integer capacity from production and
//! margin, then a 0/1 knapsack that keeps current PV outlets on ties.
//!
//!     cargo run --example knapsack

use std::collections::BTreeSet;

use oswitch::optimizer::{build_instance, solve, solve_preferring, OutletId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let readings = [
        (OutletId(0), 80.4),
        (OutletId(1), 110.0),
        (OutletId(2), 12.2),
        (OutletId(3), 0.0),
        (OutletId(4), 49.6),
        (OutletId(5), 25.0),
    ];
    for margin in [0.0, 0.1, 0.3] {
        let inst = build_instance(200.0, margin, readings)?;
        let best = solve(&inst);
        println!(
            "margin {margin:.1}: capacity {} W, weights {:?}, picks {:?} ({} W)",
            inst.capacity,
            inst.items.iter().map(|i| i.weight).collect::<Vec<_>>(),
            best.selected.iter().map(|o| o.0).collect::<Vec<_>>(),
            best.total_value
        );
    }

    let inst = build_instance(200.0, 0.0, readings)?;
    let keep: BTreeSet<OutletId> = [OutletId(1), OutletId(0), OutletId(3)].into();
    let sticky = solve_preferring(&inst, &keep);
    println!(
        "\nkeeping {:?} when possible: picks {:?} ({} W)",
        keep.iter().map(|o| o.0).collect::<Vec<_>>(),
        sticky.selected.iter().map(|o| o.0).collect::<Vec<_>>(),
        sticky.total_value
    );
    Ok(())
}

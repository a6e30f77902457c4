//! 0/1 knapsack over outlets: pick the subset of outlets to feed from PV that
//! maximizes self-consumed power without exceeding production.
//!
//! Production is rounded down and every outlet's draw is rounded up before
//! solving, so an integer-feasible selection is also feasible in real watts.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OutletId(pub u32);

impl fmt::Display for OutletId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("safety margin {0} outside [0, 1)")]
    Margin(f64),
    #[error("negative or non-finite power {0}")]
    Power(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnapsackItem {
    pub outlet: OutletId,
    /// Rounded-up draw in watts.
    pub weight: u64,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KnapsackInstance {
    /// Rounded-down margin-reduced production in watts.
    pub capacity: u64,
    pub items: Vec<KnapsackItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KnapsackSolution {
    pub selected: BTreeSet<OutletId>,
    pub total_value: u64,
    pub total_weight: u64,
}

/// Capacity = ⌊W·(1−margin)⌋, weight = ⌈wᵢ⌉ and value = weight for drawing
/// outlets; idle outlets get weight 1 and value 0.
pub fn build_instance<I>(production_w: f64, margin: f64, readings: I) -> Result<KnapsackInstance, OptimizerError>
where
    I: IntoIterator<Item = (OutletId, f64)>,
{
    if !(0.0..1.0).contains(&margin) {
        return Err(OptimizerError::Margin(margin));
    }
    if !(production_w >= 0.0) || !production_w.is_finite() {
        return Err(OptimizerError::Power(production_w));
    }
    let capacity = (production_w * (1.0 - margin)).floor() as u64;
    let mut items = Vec::new();
    for (outlet, w) in readings {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(OptimizerError::Power(w));
        }
        let item = if w > 0.0 {
            let weight = w.ceil() as u64;
            KnapsackItem {
                outlet,
                weight,
                value: weight,
            }
        } else {
            KnapsackItem {
                outlet,
                weight: 1,
                value: 0,
            }
        };
        items.push(item);
    }
    items.sort_by_key(|i| i.outlet);
    Ok(KnapsackInstance { capacity, items })
}

/// Exact optimum; ties broken toward lower outlet ids.
pub fn solve(instance: &KnapsackInstance) -> KnapsackSolution {
    solve_preferring(instance, &BTreeSet::new())
}

/// Exact optimum. Among optimal subsets, prefers the one keeping the most
/// outlets of `keep` (those already on PV), then lower outlet ids.
pub fn solve_preferring(instance: &KnapsackInstance, keep: &BTreeSet<OutletId>) -> KnapsackSolution {
    let mut items = instance.items.clone();
    items.sort_by_key(|i| i.outlet);
    let n = items.len();
    let cap = instance.capacity as usize;
    // Lexicographic (value, kept) packed into one integer.
    let scale = n as u64 + 1;
    let score = |it: &KnapsackItem| it.value * scale + keep.contains(&it.outlet) as u64;
    let width = cap + 1;
    let mut table = vec![0u64; (n + 1) * width];
    for i in 1..=n {
        let it = &items[i - 1];
        let (prev, cur) = table.split_at_mut(i * width);
        let prev = &prev[(i - 1) * width..];
        let cur = &mut cur[..width];
        let wi = it.weight as usize;
        let si = score(it);
        for w in 0..width {
            cur[w] = if wi > w {
                prev[w]
            } else {
                prev[w].max(si + prev[w - wi])
            };
        }
    }
    let mut selected = BTreeSet::new();
    let (mut total_value, mut total_weight) = (0, 0);
    let mut w = cap;
    for i in (1..=n).rev() {
        if table[i * width + w] != table[(i - 1) * width + w] {
            let it = &items[i - 1];
            selected.insert(it.outlet);
            total_value += it.value;
            total_weight += it.weight;
            w -= it.weight as usize;
        }
    }
    KnapsackSolution {
        selected,
        total_value,
        total_weight,
    }
}

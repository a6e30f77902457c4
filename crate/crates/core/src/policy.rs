//! The five switching logics. Each one filters the outlets allowed on PV and
//! picks the safety margin, then hands the rest to the knapsack optimizer.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizer::{build_instance, solve_preferring, OptimizerError, OutletId};
use crate::slotstats::{MetricKind, OutletSlotStats};

/// Normalized metric at or below which adaptive policies keep an outlet.
pub const ADAPTIVE_CUT: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("invalid policy parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolicyKind {
    Naive { margin: f64 },
    StaticVariance { threshold_w2: f64, margin: f64 },
    StaticVarianceMeanRatio { threshold_ratio: f64, margin: f64 },
    AdaptiveVariance { margin_min: f64, margin_max: f64 },
    AdaptiveVarianceMeanRatio { margin_min: f64, margin_max: f64 },
}

impl PolicyKind {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let margin_ok = |m: f64| (0.0..1.0).contains(&m);
        let ok = match *self {
            PolicyKind::Naive { margin } => margin_ok(margin),
            PolicyKind::StaticVariance {
                threshold_w2: t,
                margin,
            }
            | PolicyKind::StaticVarianceMeanRatio {
                threshold_ratio: t,
                margin,
            } => t > 0.0 && margin_ok(margin),
            PolicyKind::AdaptiveVariance { margin_min, margin_max }
            | PolicyKind::AdaptiveVarianceMeanRatio { margin_min, margin_max } => {
                margin_ok(margin_min) && margin_ok(margin_max) && margin_min <= margin_max
            }
        };
        if ok {
            Ok(())
        } else {
            Err(PolicyError::Params(format!("{self:?}")))
        }
    }

    /// Scenario-file name of the policy.
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Naive { .. } => "naive",
            PolicyKind::StaticVariance { .. } => "static_var",
            PolicyKind::StaticVarianceMeanRatio { .. } => "static_var_mean",
            PolicyKind::AdaptiveVariance { .. } => "adaptive_var",
            PolicyKind::AdaptiveVarianceMeanRatio { .. } => "adaptive_var_mean",
        }
    }

    /// The fixed margin, if the policy has one.
    pub fn fixed_margin(&self) -> Option<f64> {
        match *self {
            PolicyKind::Naive { margin }
            | PolicyKind::StaticVariance { margin, .. }
            | PolicyKind::StaticVarianceMeanRatio { margin, .. } => Some(margin),
            _ => None,
        }
    }

    /// Same policy with another fixed margin; `None` for adaptive policies.
    pub fn with_margin(&self, margin: f64) -> Option<PolicyKind> {
        Some(match *self {
            PolicyKind::Naive { .. } => PolicyKind::Naive { margin },
            PolicyKind::StaticVariance { threshold_w2, .. } => PolicyKind::StaticVariance { threshold_w2, margin },
            PolicyKind::StaticVarianceMeanRatio { threshold_ratio, .. } => PolicyKind::StaticVarianceMeanRatio {
                threshold_ratio,
                margin,
            },
            _ => return None,
        })
    }

    fn metric(&self) -> Option<MetricKind> {
        match self {
            PolicyKind::Naive { .. } => None,
            PolicyKind::StaticVariance { .. } | PolicyKind::AdaptiveVariance { .. } => Some(MetricKind::Variance),
            PolicyKind::StaticVarianceMeanRatio { .. } | PolicyKind::AdaptiveVarianceMeanRatio { .. } => {
                Some(MetricKind::VarianceOverMean)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutletAssignment {
    pub pv_set: BTreeSet<OutletId>,
    pub grid_set: BTreeSet<OutletId>,
    pub effective_margin: f64,
    pub decision_time: f64,
}

impl OutletAssignment {
    /// Everything on the grid.
    pub fn all_grid<I: IntoIterator<Item = OutletId>>(outlets: I, time: f64) -> Self {
        OutletAssignment {
            pv_set: BTreeSet::new(),
            grid_set: outlets.into_iter().collect(),
            effective_margin: 0.0,
            decision_time: time,
        }
    }
}

/// Outlets allowed into the knapsack for this slot, and the margin to apply.
pub fn eligible(
    policy: &PolicyKind,
    stats: &OutletSlotStats,
    slot: usize,
    outlets: &BTreeSet<OutletId>,
) -> (BTreeSet<OutletId>, f64) {
    match *policy {
        PolicyKind::Naive { margin } => (outlets.clone(), margin),
        PolicyKind::StaticVariance {
            threshold_w2: threshold,
            margin,
        }
        | PolicyKind::StaticVarianceMeanRatio {
            threshold_ratio: threshold,
            margin,
        } => {
            let kind = policy.metric().unwrap();
            let set = outlets
                .iter()
                .copied()
                .filter(|&o| stats.metric(o, slot, kind).is_ok_and(|m| m <= threshold))
                .collect();
            (set, margin)
        }
        PolicyKind::AdaptiveVariance { margin_min, margin_max }
        | PolicyKind::AdaptiveVarianceMeanRatio { margin_min, margin_max } => {
            let kind = policy.metric().unwrap();
            let mut set = BTreeSet::new();
            let mut sum = 0.0;
            for &o in outlets {
                let m = normalized_metric(stats, o, slot, kind);
                if m <= ADAPTIVE_CUT {
                    set.insert(o);
                    sum += m;
                }
            }
            let margin = if set.is_empty() {
                margin_min
            } else {
                margin_min + (margin_max - margin_min) * sum / set.len() as f64
            };
            (set, margin.clamp(margin_min, margin_max))
        }
    }
}

/// Metric in this slot relative to the outlet's worst slot so far: 0 when the
/// worst is 0, 1 on cold start.
pub fn normalized_metric(stats: &OutletSlotStats, outlet: OutletId, slot: usize, kind: MetricKind) -> f64 {
    let Ok(m) = stats.metric(outlet, slot, kind) else {
        return 1.0;
    };
    match stats.historical_max(outlet, kind) {
        Some(max) if max > 0.0 => (m / max).clamp(0.0, 1.0),
        _ => 0.0,
    }
}

/// Full decision pipeline: eligibility, instance, solve, partition.
pub fn decide(
    policy: &PolicyKind,
    production_w: f64,
    readings: &BTreeMap<OutletId, f64>,
    stats: &OutletSlotStats,
    now: f64,
    previous: &OutletAssignment,
) -> Result<OutletAssignment, PolicyError> {
    let outlets: BTreeSet<OutletId> = readings.keys().copied().collect();
    let slot = stats.grid().slot_of(now);
    let (allowed, margin) = eligible(policy, stats, slot, &outlets);
    let instance = build_instance(
        production_w,
        margin,
        readings
            .iter()
            .filter(|(o, _)| allowed.contains(o))
            .map(|(&o, &w)| (o, w)),
    )?;
    let solution = solve_preferring(&instance, &previous.pv_set);
    let grid_set = outlets.difference(&solution.selected).copied().collect();
    Ok(OutletAssignment {
        pv_set: solution.selected,
        grid_set,
        effective_margin: margin,
        decision_time: now,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::oracle::brute_force;
    use crate::optimizer::{KnapsackInstance, KnapsackItem};
    use crate::slotstats::SlotGrid;
    use proptest::prelude::*;

    fn ids(xs: &[u32]) -> BTreeSet<OutletId> {
        xs.iter().copied().map(OutletId).collect()
    }

    fn readings(ws: &[f64]) -> BTreeMap<OutletId, f64> {
        ws.iter().enumerate().map(|(i, &w)| (OutletId(i as u32), w)).collect()
    }

    /// Slot-0 stats where outlet i has exactly the given variance (mean 100).
    fn stats_with_variances(vars: &[f64]) -> OutletSlotStats {
        let mut st = OutletSlotStats::new(SlotGrid::default());
        for (i, v) in vars.iter().enumerate() {
            let d = v.sqrt();
            st.record(OutletId(i as u32), 0.0, 100.0 - d).unwrap();
            st.record(OutletId(i as u32), 0.0, 100.0 + d).unwrap();
        }
        st
    }

    #[test]
    fn naive_keeps_everything() {
        let st = OutletSlotStats::new(SlotGrid::default());
        let all = ids(&[0, 1, 2, 3, 4]);
        let (set, m) = eligible(&PolicyKind::Naive { margin: 0.2 }, &st, 0, &all);
        assert_eq!(set, all);
        assert_eq!(m, 0.2);
    }

    #[test]
    fn static_variance_threshold() {
        let st = stats_with_variances(&[50.0, 150.0, 99.0]);
        let p = PolicyKind::StaticVariance {
            threshold_w2: 100.0,
            margin: 0.1,
        };
        let (set, m) = eligible(&p, &st, 0, &ids(&[0, 1, 2]));
        assert_eq!(set, ids(&[0, 2]));
        assert_eq!(m, 0.1);
        // equal to the threshold stays eligible; cold start does not
        let st = stats_with_variances(&[100.0]);
        let (set, _) = eligible(&p, &st, 0, &ids(&[0, 1]));
        assert_eq!(set, ids(&[0]));
    }

    #[test]
    fn static_ratio_threshold() {
        // variances 400 at mean 100 → ratio 4
        let st = stats_with_variances(&[400.0, 100.0]);
        let p = PolicyKind::StaticVarianceMeanRatio {
            threshold_ratio: 2.0,
            margin: 0.0,
        };
        assert_eq!(eligible(&p, &st, 0, &ids(&[0, 1])).0, ids(&[1]));
    }

    #[test]
    fn adaptive_zero_variance_floor() {
        let st = stats_with_variances(&[0.0, 0.0, 0.0]);
        let p = PolicyKind::AdaptiveVariance {
            margin_min: 0.05,
            margin_max: 0.40,
        };
        let (set, m) = eligible(&p, &st, 0, &ids(&[0, 1, 2]));
        assert_eq!(set, ids(&[0, 1, 2]));
        assert_eq!(m, 0.05);
    }

    #[test]
    fn adaptive_scales_margin_with_metric() {
        let mut st = stats_with_variances(&[100.0, 0.0]);
        // outlet 0's worst slot has variance 400 → normalized 0.25 in slot 0
        st.record(OutletId(0), 1800.0, 80.0).unwrap();
        st.record(OutletId(0), 1800.0, 120.0).unwrap();
        let p = PolicyKind::AdaptiveVariance {
            margin_min: 0.1,
            margin_max: 0.5,
        };
        assert_eq!(normalized_metric(&st, OutletId(0), 0, MetricKind::Variance), 0.25);
        let (set, m) = eligible(&p, &st, 0, &ids(&[0, 1, 2]));
        // outlet 2 has no history → 1.0 → excluded
        assert_eq!(set, ids(&[0, 1]));
        assert!((m - (0.1 + 0.4 * 0.125)).abs() < 1e-12);
        // slot 1 is outlet 0's worst → excluded
        let (set, _) = eligible(&p, &st, 1, &ids(&[0]));
        assert!(set.is_empty());
    }

    fn empty_stats() -> OutletSlotStats {
        stats_with_variances(&[0.0, 0.0, 0.0])
    }

    #[test]
    fn zero_production_puts_everything_on_grid() {
        let r = readings(&[80.0, 90.0, 70.0]);
        let a = decide(
            &PolicyKind::Naive { margin: 0.0 },
            0.0,
            &r,
            &empty_stats(),
            0.0,
            &OutletAssignment::default(),
        )
        .unwrap();
        assert!(a.pv_set.is_empty());
        assert_eq!(a.grid_set, ids(&[0, 1, 2]));
    }

    #[test]
    fn naive_decision_matches_enumeration() {
        let r = readings(&[80.0, 90.0, 70.0]);
        let oracle = brute_force(&KnapsackInstance {
            capacity: 200,
            items: [80, 90, 70]
                .iter()
                .enumerate()
                .map(|(i, &w)| KnapsackItem {
                    outlet: OutletId(i as u32),
                    weight: w,
                    value: w,
                })
                .collect(),
        });
        assert_eq!(oracle, 170);
        let a = decide(
            &PolicyKind::Naive { margin: 0.0 },
            200.0,
            &r,
            &empty_stats(),
            0.0,
            &OutletAssignment::default(),
        )
        .unwrap();
        assert_eq!(a.pv_set, ids(&[0, 1]));
        assert_eq!(a.grid_set, ids(&[2]));
    }

    #[test]
    fn static_exclusion_changes_the_choice() {
        let r = readings(&[80.0, 90.0, 70.0]);
        let st = stats_with_variances(&[0.0, 500.0, 0.0]);
        let a = decide(
            &PolicyKind::StaticVariance {
                threshold_w2: 100.0,
                margin: 0.0,
            },
            200.0,
            &r,
            &st,
            0.0,
            &OutletAssignment::default(),
        )
        .unwrap();
        assert_eq!(a.pv_set, ids(&[0, 2]));
    }

    #[test]
    fn invalid_params() {
        assert!(PolicyKind::Naive { margin: 1.0 }.validate().is_err());
        assert!(PolicyKind::StaticVariance {
            threshold_w2: 0.0,
            margin: 0.1
        }
        .validate()
        .is_err());
        assert!(PolicyKind::AdaptiveVariance {
            margin_min: 0.5,
            margin_max: 0.4
        }
        .validate()
        .is_err());
        assert!(PolicyKind::AdaptiveVarianceMeanRatio {
            margin_min: 0.05,
            margin_max: 0.4
        }
        .validate()
        .is_ok());
    }

    fn arb_policy() -> impl Strategy<Value = PolicyKind> {
        prop_oneof![
            (0.0f64..0.9).prop_map(|margin| PolicyKind::Naive { margin }),
            (1.0f64..2000.0, 0.0f64..0.9).prop_map(|(t, margin)| PolicyKind::StaticVariance {
                threshold_w2: t,
                margin
            }),
            (0.1f64..50.0, 0.0f64..0.9).prop_map(|(t, margin)| PolicyKind::StaticVarianceMeanRatio {
                threshold_ratio: t,
                margin
            }),
            (0.0f64..0.5, 0.0f64..0.4).prop_map(|(a, d)| PolicyKind::AdaptiveVariance {
                margin_min: a,
                margin_max: a + d
            }),
            (0.0f64..0.5, 0.0f64..0.4).prop_map(|(a, d)| PolicyKind::AdaptiveVarianceMeanRatio {
                margin_min: a,
                margin_max: a + d
            }),
        ]
    }

    fn arb_stats() -> impl Strategy<Value = OutletSlotStats> {
        prop::collection::vec((0u32..6, 0.0f64..86400.0, 0.0f64..300.0), 0..200).prop_map(|obs| {
            let mut st = OutletSlotStats::new(SlotGrid::new(8).unwrap());
            for (o, t, w) in obs {
                st.record(OutletId(o), t, w).unwrap();
            }
            st
        })
    }

    proptest! {
        #[test]
        fn partition_and_naive_dominance(
            policy in arb_policy(),
            stats in arb_stats(),
            draws in prop::collection::vec(0.0f64..250.0, 1..6),
            production in 0.0f64..800.0,
            now in 0.0f64..86400.0,
        ) {
            let r = readings(&draws);
            let prev = OutletAssignment::default();
            let a = decide(&policy, production, &r, &stats, now, &prev).unwrap();
            prop_assert!(a.pv_set.is_disjoint(&a.grid_set));
            let union: BTreeSet<_> = a.pv_set.union(&a.grid_set).copied().collect();
            prop_assert_eq!(union, r.keys().copied().collect::<BTreeSet<_>>());
            let naive = decide(&PolicyKind::Naive { margin: 0.0 }, production, &r, &stats, now, &prev).unwrap();
            let value = |s: &BTreeSet<OutletId>| s.iter().map(|o| r[o].ceil() as u64).sum::<u64>();
            prop_assert!(value(&naive.pv_set) >= value(&a.pv_set));
            if let PolicyKind::AdaptiveVariance { margin_min, margin_max }
                | PolicyKind::AdaptiveVarianceMeanRatio { margin_min, margin_max } = policy {
                prop_assert!(a.effective_margin >= margin_min && a.effective_margin <= margin_max);
            }
        }

        #[test]
        fn higher_margin_never_adds_weight(
            draws in prop::collection::vec(0.0f64..250.0, 1..6),
            production in 0.0f64..800.0,
            m1 in 0.0f64..0.9,
            dm in 0.0f64..0.09,
        ) {
            let r = readings(&draws);
            let st = OutletSlotStats::new(SlotGrid::default());
            let prev = OutletAssignment::default();
            let lo = decide(&PolicyKind::Naive { margin: m1 }, production, &r, &st, 0.0, &prev).unwrap();
            let hi = decide(&PolicyKind::Naive { margin: m1 + dm }, production, &r, &st, 0.0, &prev).unwrap();
            let w = |s: &BTreeSet<OutletId>| s.iter().map(|o| r[o].ceil().max(1.0) as u64).sum::<u64>();
            prop_assert!(w(&hi.pv_set) <= w(&lo.pv_set));
        }
    }
}

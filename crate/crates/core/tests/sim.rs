use oswitch::inverter::InverterConfig;
use oswitch::policy::PolicyKind;
use oswitch::series::StepSeries;
use oswitch::sim::traces::NamedTrace;
use oswitch::sim::{self, RunConfig, Scenario};
use proptest::prelude::*;

const HOUR: f64 = 3600.0;

fn outlet(name: &str, points: Vec<(f64, f64)>) -> NamedTrace {
    NamedTrace {
        name: name.into(),
        series: StepSeries::new(points, HOUR).unwrap(),
    }
}

fn one_hour(outlets: Vec<NamedTrace>, pv_w: f64, policy: PolicyKind) -> Scenario {
    let mut sc = Scenario::with_traces(outlets, StepSeries::constant(pv_w, 0.0, HOUR).unwrap(), policy);
    sc.run = RunConfig {
        duration_s: HOUR,
        warmup_days: 0,
        ..RunConfig::default()
    };
    sc.inverter = InverterConfig {
        max_output_w: 2000.0,
        dc_capacity_w: 2000.0,
        conversion_efficiency: 1.0,
        battery_capacity_wh: 0.0,
        battery_efficiency: 0.9,
    };
    sc
}

const NAIVE: PolicyKind = PolicyKind::Naive { margin: 0.0 };

#[test]
fn two_loads_fit_under_production() {
    let sc = one_hour(
        vec![outlet("a", vec![(0.0, 100.0)]), outlet("b", vec![(0.0, 50.0)])],
        200.0,
        NAIVE,
    );
    let out = sim::run(&sc).unwrap();
    let r = &out.report;
    assert!((r.self_consumed_wh - 150.0).abs() < 0.1, "{r:?}");
    assert!((r.total_consumption_wh - 150.0).abs() < 1e-9);
    assert_eq!(r.error_count, 0);
    assert_eq!(r.switch_count, 2);
    assert!(out.lacks.is_empty());
}

#[test]
fn load_above_production_stays_on_grid() {
    let out = sim::run(&one_hour(vec![outlet("heater", vec![(0.0, 300.0)])], 200.0, NAIVE)).unwrap();
    assert_eq!(out.report.self_consumed_wh, 0.0);
    assert_eq!(out.report.switch_count, 0);
    assert!((out.report.grid_served_wh - 300.0).abs() < 1e-9);
}

#[test]
fn step_between_epochs_causes_one_lack() {
    let sc = one_hour(
        vec![outlet("kettle", vec![(0.0, 100.0), (1000.0, 250.0)])],
        200.0,
        NAIVE,
    );
    let out = sim::run(&sc).unwrap();
    assert_eq!(out.report.error_count, 1);
    assert_eq!(out.lacks.len(), 1);
    let lack = out.lacks[0];
    assert_eq!(lack.onset, 1000.0);
    assert!((lack.time - 1000.5).abs() < 1e-9);
    assert_eq!(lack.pv_demand_w, 250.0);
}

#[test]
fn draining_battery_ends_in_a_lack() {
    let mut sc = one_hour(vec![outlet("lamp", vec![(0.0, 100.0)])], 0.0, NAIVE);
    sc.traces.pv = StepSeries::new(vec![(0.0, 300.0), (1800.0, 0.0)], HOUR).unwrap();
    sc.inverter.battery_capacity_wh = 21.0;
    let out = sim::run(&sc).unwrap();
    assert_eq!(out.lacks.len(), 1, "{:?}", out.lacks);
    let lack = out.lacks[0];
    assert!((lack.onset - (1800.0 + 21.0 * 36.0)).abs() < 1e-6, "{lack:?}");
    assert_eq!(lack.available_w, 0.0);
    let r = &out.report;
    assert!((r.self_consumed_wh - (50.0 + 21.0)).abs() < 0.1, "{r:?}");
}

#[test]
fn margin_close_to_one_selects_nothing() {
    let sc = one_hour(
        vec![outlet("a", vec![(0.0, 100.0)]), outlet("b", vec![(0.0, 50.0)])],
        200.0,
        PolicyKind::StaticVariance {
            threshold_w2: 500.0,
            margin: 0.99,
        },
    );
    let r = sim::run(&sc).unwrap().report;
    assert_eq!(r.saving_percent(), 0.0);
    assert_eq!(r.error_count, 0);
}

fn busy_hour() -> Scenario {
    one_hour(
        vec![
            outlet("fridge", vec![(0.0, 80.0), (600.0, 0.0), (1500.0, 80.0), (2100.0, 0.0)]),
            outlet("pc", vec![(0.0, 110.0), (915.0, 130.0), (1801.0, 95.0)]),
            outlet("kettle", vec![(0.0, 0.0), (1210.0, 1500.0), (1390.0, 0.0)]),
        ],
        220.0,
        PolicyKind::StaticVariance {
            threshold_w2: 500.0,
            margin: 0.1,
        },
    )
}

#[test]
fn runs_are_deterministic() {
    let a = sim::run(&busy_hour()).unwrap();
    let b = sim::run(&busy_hour()).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.lacks, b.lacks);
    assert_eq!(a.bus_log, b.bus_log);
}

#[test]
fn single_margin_sweep_matches_run() {
    let sc = busy_hour();
    let rows = sim::sweep(&sc, &[0.1]).unwrap();
    assert_eq!(rows, vec![sim::run(&sc).unwrap().report]);
}

#[test]
fn sweep_rejects_adaptive_and_empty() {
    let sc = busy_hour().with_policy(PolicyKind::AdaptiveVariance {
        margin_min: 0.05,
        margin_max: 0.4,
    });
    assert!(sim::sweep(&sc, &[0.1]).is_err());
    assert!(sim::sweep(&busy_hour(), &[]).is_err());
}

#[test]
fn invalid_scenarios_are_rejected() {
    let mut sc = busy_hour();
    sc.run.duration_s = 2.0 * HOUR;
    assert!(sim::run(&sc).is_err());
    let mut sc = busy_hour();
    sc.run.lack_cooldown_s = 0.0;
    assert!(sim::run(&sc).is_err());
}

fn piecewise() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0u32..3600, 0u32..400), 1..6).prop_map(|mut v| {
        v.sort();
        v.dedup_by_key(|p| p.0);
        v[0].0 = 0;
        v.into_iter().map(|(t, w)| (t as f64, w as f64)).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_books_balance(
        loads in prop::collection::vec(piecewise(), 1..5),
        pv in piecewise(),
        margin in 0.0f64..0.5,
    ) {
        let outlets = loads
            .into_iter()
            .enumerate()
            .map(|(k, pts)| outlet(&format!("o{k}"), pts))
            .collect();
        let mut sc = one_hour(outlets, 0.0, PolicyKind::Naive { margin });
        sc.traces.pv = StepSeries::new(pv, HOUR).unwrap();
        let r = sim::run(&sc).unwrap().report;
        prop_assert!((r.self_consumed_wh + r.grid_served_wh - r.total_consumption_wh).abs() < 1e-6);
        prop_assert!(r.self_consumed_wh <= r.total_production_wh + 1e-6);
        prop_assert!(r.self_consumed_wh >= 0.0);
        prop_assert!((0.0..=100.0 + 1e-9).contains(&r.saving_percent()));
    }
}

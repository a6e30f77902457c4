use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn oswitch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oswitch")).args(args).output().unwrap()
}

fn fixture(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(rel)
        .display()
        .to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn lines(p: PathBuf) -> Vec<String> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn simulate_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = oswitch(&["simulate", "--scenario", &fixture("reference.toml"), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["report.csv", "summary.txt", "events.csv", "lacks.csv", "history.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let report = lines(out.join("report.csv"));
    assert_eq!(report[0], "margin,policy,slots,saving_percent,error_count,switch_count");
    assert_eq!(report.len(), 2);
    assert!(report[1].contains(",adaptive_var,48,"));
    assert_eq!(
        lines(out.join("events.csv"))[0],
        "time_s,sender,recipient,kind,size_bytes"
    );
    assert!(String::from_utf8_lossy(&o.stdout).contains("saving"));
}

#[test]
fn seed_override_changes_generated_traces() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(
        oswitch(&["simulate", "--scenario", &fixture("reference.toml"), "--out", s(&a)])
            .status
            .success()
    );
    assert!(oswitch(&[
        "simulate",
        "--scenario",
        &fixture("reference.toml"),
        "--out",
        s(&b),
        "--seed",
        "99"
    ])
    .status
    .success());
    assert_ne!(
        std::fs::read(a.join("report.csv")).unwrap(),
        std::fs::read(b.join("report.csv")).unwrap()
    );
}

#[test]
fn sweep_writes_one_row_per_margin() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("static.toml");
    let text = std::fs::read_to_string(fixture("reference.toml"))
        .unwrap()
        .replace("policy = \"adaptive_var\"", "policy = \"static_var\"\nthreshold = 500");
    std::fs::write(&scenario, text).unwrap();
    let out = dir.path().join("sweep");
    let o = oswitch(&[
        "sweep",
        "--scenario",
        s(&scenario),
        "--margins",
        "0.4,0,0.2,0.1,0.3",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = lines(out.join("sweep.csv"));
    assert_eq!(rows.len(), 6);
    let margins: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(margins, ["0.0000", "0.1000", "0.2000", "0.3000", "0.4000"]);
}

#[test]
fn sweep_refuses_adaptive_policy_and_bad_margins() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let o = oswitch(&[
        "sweep",
        "--scenario",
        &fixture("reference.toml"),
        "--margins",
        "0.1",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = oswitch(&[
        "sweep",
        "--scenario",
        &fixture("reference.toml"),
        "--margins",
        "0.1,1.2",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generated_traces_drive_a_file_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(
        &spec,
        r#"
days = 2

[pv]
peak_dc_w = 300

[[outlets]]
name = "fridge"
archetype = "fridge"
on_w = 90
period_s = 1800
duty = 0.4

[[outlets]]
name = "lamp"
archetype = "resistive"
watts = 40
on_h = 10
off_h = 16
"#,
    )
    .unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let o = oswitch(&["gen-traces", "--spec", s(&spec), "--seed", seed, "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "outlets.csv"), read(&b, "outlets.csv"));
    assert_eq!(read(&a, "pv.csv"), read(&b, "pv.csv"));
    assert_ne!(read(&a, "outlets.csv"), read(&c, "outlets.csv"));
    assert_eq!(lines(a.join("outlets.csv"))[0], "time_s,outlet_id,watts");

    let scenario = a.join("scenario.toml");
    std::fs::write(
        &scenario,
        "[run]\nwarmup_days = 1\n\n[policy]\npolicy = \"naive\"\n\n[traces]\noutlets = \"outlets.csv\"\npv = \"pv.csv\"\n",
    )
    .unwrap();
    let o = oswitch(&["simulate", "--scenario", s(&scenario), "--out", s(&a.join("run"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(lines(a.join("run/report.csv"))[1].contains(",naive,"));

    let stats = a.join("stats/stats.csv");
    let o = oswitch(&["export-stats", "--scenario", s(&scenario), "--out", s(&stats)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = lines(stats);
    assert_eq!(rows[0], "outlet,slot,count,mean_w,variance_w2");
    assert!(rows.iter().any(|r| r.starts_with("lamp,")));
    assert!(rows.iter().any(|r| r.starts_with("fridge,")));
}

#[test]
fn office_audit_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    assert!(oswitch(&[
        "gen-traces",
        "--spec",
        &fixture("office/traces.toml"),
        "--seed",
        "3",
        "--out",
        s(&traces)
    ])
    .status
    .success());
    std::fs::remove_file(traces.join("pv.csv")).unwrap();
    let out = dir.path().join("audit");
    let o = oswitch(&[
        "audit",
        "--traces",
        s(&traces),
        "--registry",
        &fixture("office/registry.csv"),
        "--schedule",
        &fixture("office/schedule.csv"),
        "--tariff",
        "0.25",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let days = lines(out.join("audit.csv"));
    assert_eq!(days[0], "day,weekday,kwh,cost");
    assert_eq!(days.len(), 8);
    assert!(days[1].starts_with("0,mon,"));
    let per_line = lines(out.join("lines.csv"));
    assert_eq!(per_line.len(), 7);
    assert!(per_line.iter().any(|l| l.starts_with("servers,0,")));
    assert!(String::from_utf8_lossy(&o.stdout).contains("0.2500 per kWh"));
}

#[test]
fn audit_rejects_unregistered_lines() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    std::fs::write(&trace, "time_s,outlet_id,watts\n0,boiler,2000\n86400,boiler,2000\n").unwrap();
    let o = oswitch(&[
        "audit",
        "--traces",
        s(&trace),
        "--registry",
        &fixture("office/registry.csv"),
        "--schedule",
        &fixture("office/schedule.csv"),
        "--out",
        s(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("boiler"), "{}", stderr(&o));
}

#[test]
fn exit_codes() {
    assert_eq!(oswitch(&["--help"]).status.code(), Some(0));
    assert_eq!(oswitch(&["--version"]).status.code(), Some(0));
    assert_eq!(oswitch(&[]).status.code(), Some(2));
    assert_eq!(oswitch(&["simulate", "--scenario", "x.toml"]).status.code(), Some(2));
    let o = oswitch(&[
        "simulate",
        "--scenario",
        "/nonexistent/none.toml",
        "--out",
        "/tmp/never",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scenario file not found"), "{}", stderr(&o));
    let o = oswitch(&[
        "gen-traces",
        "--spec",
        "/nonexistent/spec.toml",
        "--seed",
        "1",
        "--out",
        "/tmp/never",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("trace spec file not found"), "{}", stderr(&o));
}

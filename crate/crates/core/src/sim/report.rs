use std::io::Write;
use std::path::Path;

use super::engine::{run, EnergyLackEvent, RunOutput};
use super::{Scenario, SimError};

/// Energy totals and counters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub policy: String,
    /// The fixed margin, or the mean effective margin of adaptive policies.
    pub margin: f64,
    pub slots: usize,
    pub total_consumption_wh: f64,
    pub total_production_wh: f64,
    pub self_consumed_wh: f64,
    pub grid_served_wh: f64,
    pub error_count: u64,
    pub switch_count: u64,
    pub decisions: u64,
}

impl MetricsReport {
    /// Self-consumed share of total consumption, in percent.
    pub fn saving_percent(&self) -> f64 {
        if self.total_consumption_wh > 0.0 {
            100.0 * self.self_consumed_wh / self.total_consumption_wh
        } else {
            0.0
        }
    }

    /// Self-consumed share of total production, in percent.
    pub fn production_used_percent(&self) -> f64 {
        if self.total_production_wh > 0.0 {
            100.0 * self.self_consumed_wh / self.total_production_wh
        } else {
            0.0
        }
    }
}

pub const REPORT_HEADER: &str = "margin,policy,slots,saving_percent,error_count,switch_count";

pub fn write_report_csv<W: Write>(rows: &[MetricsReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{:.4},{},{},{:.4},{},{}",
            r.margin,
            r.policy,
            r.slots,
            r.saving_percent(),
            r.error_count,
            r.switch_count
        )?;
    }
    Ok(())
}

pub fn write_summary<W: Write>(r: &MetricsReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "policy              {}", r.policy)?;
    writeln!(w, "margin              {:.4}", r.margin)?;
    writeln!(w, "slots per day       {}", r.slots)?;
    writeln!(w, "consumption         {:.3} Wh", r.total_consumption_wh)?;
    writeln!(w, "PV production       {:.3} Wh", r.total_production_wh)?;
    writeln!(w, "self-consumed       {:.3} Wh", r.self_consumed_wh)?;
    writeln!(w, "from grid           {:.3} Wh", r.grid_served_wh)?;
    writeln!(w, "saving              {:.2} % of consumption", r.saving_percent())?;
    writeln!(
        w,
        "production used     {:.2} % of production",
        r.production_used_percent()
    )?;
    writeln!(w, "energy lacks        {}", r.error_count)?;
    writeln!(w, "selector switches   {}", r.switch_count)?;
    writeln!(w, "decisions           {}", r.decisions)?;
    writeln!(w, "saving is measured against consumption")
}

pub fn write_lacks_csv<W: Write>(lacks: &[EnergyLackEvent], mut w: W) -> std::io::Result<()> {
    writeln!(w, "onset_s,time_s,pv_demand_w,available_w")?;
    for l in lacks {
        writeln!(
            w,
            "{:.6},{:.6},{:.3},{:.3}",
            l.onset, l.time, l.pv_demand_w, l.available_w
        )?;
    }
    Ok(())
}

fn create(dir: &Path, name: &str) -> std::io::Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))
}

/// Writes `report.csv`, `summary.txt`, `events.csv`, `lacks.csv` and
/// `history.csv` into `dir`.
pub fn write_run_artifacts(out: &RunOutput, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = create(dir, "report.csv")?;
    write_report_csv(std::slice::from_ref(&out.report), &mut f)?;
    f.flush()?;
    let mut f = create(dir, "summary.txt")?;
    write_summary(&out.report, &mut f)?;
    f.flush()?;
    let mut f = create(dir, "events.csv")?;
    crate::bus::write_log_entries(&out.bus_log, &mut f)?;
    f.flush()?;
    let mut f = create(dir, "lacks.csv")?;
    write_lacks_csv(&out.lacks, &mut f)?;
    f.flush()?;
    let mut f = create(dir, "history.csv")?;
    out.history.write_csv(&mut f)?;
    f.flush()
}

/// One run per margin on identical traces, in parallel; rows come back in
/// ascending margin order.
pub fn sweep(scenario: &Scenario, margins: &[f64]) -> Result<Vec<MetricsReport>, SimError> {
    if margins.is_empty() {
        return Err(SimError::Sweep("no margins given".into()));
    }
    if scenario.policy.fixed_margin().is_none() {
        return Err(SimError::Sweep(format!(
            "policy {} has no configurable margin",
            scenario.policy.name()
        )));
    }
    let mut margins = margins.to_vec();
    margins.sort_by(f64::total_cmp);
    let scenarios = margins
        .iter()
        .map(|&m| {
            let p = scenario.policy.with_margin(m).expect("fixed-margin policy");
            p.validate()?;
            Ok(scenario.with_policy(p))
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    std::thread::scope(|s| {
        let handles: Vec<_> = scenarios.iter().map(|sc| s.spawn(move || run(sc))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep run panicked").map(|o| o.report))
            .collect()
    })
}

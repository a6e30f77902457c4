//! Command-line front end.
//!
//! Exit status: 0 on success, 2 on usage errors, 1 on runtime errors. Log
//! verbosity follows `OSWITCH_LOG` (`error`, `warn`, `info`, `debug`).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::audit::{self, AuditError, ClosingSchedule};
use crate::gateway::{DeviceRegistry, GatewayError};
use crate::sim::{self, Scenario, SimError, TraceSpec};

#[derive(Debug, Parser)]
#[command(
    name = "oswitch",
    version,
    about = "PV self-consumption switching simulator and office audit tool"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write report, summary, bus event log, lacks and history.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replaces the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a fixed-margin policy once per margin.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated fractions in [0, 1).
        #[arg(long, value_delimiter = ',', value_parser = parse_margin, required = true)]
        margins: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate synthetic outlet and PV traces from a spec file.
    GenTraces {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Office consumption audit.
    Audit {
        /// A trace CSV or a directory of them.
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        /// Price per kWh.
        #[arg(long, default_value_t = audit::DEFAULT_TARIFF)]
        tariff: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a scenario's traces into slot statistics and write them as CSV.
    ExportStats {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_margin(s: &str) -> Result<f64, String> {
    let m: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..1.0).contains(&m) {
        Ok(m)
    } else {
        Err(format!("margin {m} outside [0, 1)"))
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("sim: {0}")]
    Sim(#[from] SimError),
    #[error("audit: {0}")]
    Audit(#[from] AuditError),
    #[error("gateway: {0}")]
    Gateway(#[from] GatewayError),
    #[error("{what} file not found: {path}")]
    NotFound { what: &'static str, path: String },
    #[error("{what} {path}: {source}")]
    File {
        what: &'static str,
        path: String,
        source: std::io::Error,
    },
}

fn file_err<'a>(what: &'static str, path: &'a Path) -> impl FnOnce(std::io::Error) -> CliError + 'a {
    move |source| CliError::File {
        what,
        path: path.display().to_string(),
        source,
    }
}

fn read_input(what: &'static str, path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::NotFound {
            what,
            path: path.display().to_string(),
        },
        _ => file_err("cannot read", path)(e),
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(file_err("cannot create output directory", dir))
}

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(file_err("cannot create", path))?);
    f(&mut out)
        .and_then(|_| out.flush())
        .map_err(file_err("cannot write", path))
}

/// Executes a parsed command.
pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate { scenario, out, seed } => {
            let sc = Scenario::load(&scenario, seed)?;
            log::info!("simulating {} with policy {}", scenario.display(), sc.policy.name());
            let result = sim::run(&sc)?;
            create_dir(&out)?;
            sim::write_run_artifacts(&result, &out).map_err(file_err("cannot write results to", &out))?;
            let mut stdout = std::io::stdout().lock();
            sim::write_summary(&result.report, &mut stdout).map_err(file_err("cannot write", Path::new("stdout")))?;
        }
        Command::Sweep {
            scenario,
            margins,
            out,
            seed,
        } => {
            let sc = Scenario::load(&scenario, seed)?;
            let rows = sim::sweep(&sc, &margins)?;
            create_dir(&out)?;
            write_file(&out.join("sweep.csv"), |w| sim::write_report_csv(&rows, w))?;
            sim::write_report_csv(&rows, std::io::stdout().lock())
                .map_err(file_err("cannot write", Path::new("stdout")))?;
        }
        Command::GenTraces { spec, seed, out } => {
            let text = read_input("trace spec", &spec)?;
            let spec = TraceSpec::from_toml(&text)?;
            create_dir(&out)?;
            let set = sim::generate_traces(&spec, seed, &out)?;
            log::info!("wrote {} outlet traces to {}", set.outlets.len(), out.display());
        }
        Command::Audit {
            traces,
            registry,
            schedule,
            tariff,
            out,
        } => {
            let reg = DeviceRegistry::read_from(read_input("registry", &registry)?.as_bytes())?;
            let sched = ClosingSchedule::read_from(read_input("schedule", &schedule)?.as_bytes())?;
            let lines = audit::load_lines(&traces, &reg)?;
            let report = audit::audit(&lines, &sched, tariff)?;
            create_dir(&out)?;
            write_file(&out.join("audit.csv"), |w| audit::write_days_csv(&report.profile, w))?;
            write_file(&out.join("lines.csv"), |w| audit::write_lines_csv(&report, w))?;
            write_file(&out.join("summary.txt"), |w| audit::write_summary(&report, w))?;
            audit::write_summary(&report, std::io::stdout().lock())
                .map_err(file_err("cannot write", Path::new("stdout")))?;
        }
        Command::ExportStats { scenario, out, seed } => {
            let sc = Scenario::load(&scenario, seed)?;
            let stats = sim::replay_stats(&sc)?;
            if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            let names: Vec<String> = sc.outlet_names().map(str::to_string).collect();
            write_file(&out, |w| stats.write_csv(w, |o| names[o.0 as usize].clone()))?;
        }
    }
    Ok(())
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("OSWITCH_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("oswitch: {e}");
            1
        }
    }
}

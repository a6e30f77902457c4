//! Scenario simulation: trace playback through emulated meters, gateway and
//! bus, periodic policy decisions, energy-lack detection and accounting.

mod engine;
mod report;
mod scenario;
pub mod traces;

use thiserror::Error;

pub use engine::{replay_stats, run, EnergyLackEvent, RunOutput};
pub use report::{
    sweep, write_lacks_csv, write_report_csv, write_run_artifacts, write_summary, MetricsReport, REPORT_HEADER,
};
pub use scenario::{DelayModel, MeterConfig, RunConfig, Scenario, TraceSource};
pub use traces::{generate_traces, TraceSet, TraceSpec};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario file not found: {0}")]
    ScenarioNotFound(String),
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("trace: {0}")]
    Trace(String),
    #[error("trace: {0}")]
    Series(#[from] crate::series::SeriesError),
    #[error("sweep: {0}")]
    Sweep(String),
    #[error("inverter: {0}")]
    Inverter(#[from] crate::inverter::InverterError),
    #[error("policy: {0}")]
    Policy(#[from] crate::policy::PolicyError),
    #[error("bus: {0}")]
    Bus(#[from] crate::bus::BusError),
    #[error("meter: {0}")]
    Meter(#[from] crate::meter::MeterError),
    #[error("gateway: {0}")]
    Gateway(#[from] crate::gateway::GatewayError),
    #[error("slot statistics: {0}")]
    Stats(#[from] crate::slotstats::SlotStatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

//! Outlet-level PV self-consumption: emulated meters on a serial bus, a
//! gateway keeping history, a hybrid inverter, per-slot consumption
//! statistics, knapsack-based switching policies, a scenario simulator and
//! office consumption audits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod bus;
pub mod cli;
pub mod electrical;
pub mod gateway;
pub mod inverter;
pub mod meter;
pub mod optimizer;
pub mod policy;
pub mod series;
pub mod sim;
pub mod slotstats;

use thiserror::Error;

/// Any library error, tagged with the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("electrical: {0}")]
    Electrical(#[from] electrical::ElectricalError),
    #[error("bus: {0}")]
    Bus(#[from] bus::BusError),
    #[error("meter: {0}")]
    Meter(#[from] meter::MeterError),
    #[error("gateway: {0}")]
    Gateway(#[from] gateway::GatewayError),
    #[error("inverter: {0}")]
    Inverter(#[from] inverter::InverterError),
    #[error("slot statistics: {0}")]
    SlotStats(#[from] slotstats::SlotStatsError),
    #[error("optimizer: {0}")]
    Optimizer(#[from] optimizer::OptimizerError),
    #[error("policy: {0}")]
    Policy(#[from] policy::PolicyError),
    #[error("sim: {0}")]
    Sim(#[from] sim::SimError),
    #[error("audit: {0}")]
    Audit(#[from] audit::AuditError),
    #[error("series: {0}")]
    Series(#[from] series::SeriesError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

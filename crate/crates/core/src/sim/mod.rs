//! Discrete-event simulation of the shared cluster.

mod engine;
mod event;
mod trace;

pub use engine::{
    route_to_least_backlog, simulate, window_fulfillment, EpochContext, EpochDecision, EpochPolicy, EpochRecord,
    MigrationRecord, SimConfig, SimOutcome, Simulation, UnfinishedRequest,
};
pub use event::{Event, EventKind, EventQueue};
pub use trace::{write_trace, TraceRecord};

//! Deterministic discrete-event simulation of FCFS queueing networks.
//!
//! Updates flow from a source through a chain of nodes to a monitor, and ACKs
//! return over a reverse chain (or instantly). The source is either an
//! open-loop generator or a rate-controlled endpoint from `acp-wire` driven on
//! virtual time. Every stochastic element draws from its own seeded stream.

pub mod engine;
pub mod replay;
pub mod sim;
pub mod sweep;
pub mod topology;

use acp_core::AgeError;
use acp_wire::SourceError;
use thiserror::Error;

pub use replay::{replay_endpoint, ReplayOutcome};
pub use sim::{
    run, Arrivals, EndpointInput, NodeReport, PacketKind, SimConfig, SimReport, TraceKind,
    TraceRecord, Workload,
};
pub use sweep::{
    age_vs_lambda_sweep, argmin, optimal_backlog_profile, run_seeds, BacklogProfile,
    ProfileOptions, SweepPoint,
};
pub use topology::{CrossFlow, NodeSpec, ReversePath, Service, Topology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation setup: {0}")]
    InvalidConfig(String),
    #[error("unstable configuration: {0}")]
    Unstable(String),
    #[error("source initialization received no ACKs")]
    ConnectionFailed,
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Age(#[from] AgeError),
}

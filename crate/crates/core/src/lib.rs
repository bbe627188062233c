//! Resource planning for operator-based stream processing.
//!
//! The crate models an operator network as an open queueing network: each
//! operator is an M/M/k station, per-operator arrival rates come from the
//! traffic equations (or from live measurements), and the expected tuple
//! sojourn time is the arrival-weighted average of the station sojourns.
//! On top of the model sit a greedy allocator that is exactly optimal under
//! a processor budget, a provisioner that finds the cheapest allocation
//! meeting a latency target, a measurement pipeline with smoothing, a
//! discrete-event simulator used as ground truth, and a closed control loop
//! that re-balances a running (simulated) system.

pub mod control;
pub mod error;
pub mod metrics;
pub mod planner;
pub mod queueing;
pub mod sim;
pub mod topology;

pub use error::{Error, Result};
pub use planner::{Plan, PlanMode, PlanRequest};
pub use queueing::{Allocation, Sojourn, SojournEstimate};
pub use topology::{RateProfile, Topology};

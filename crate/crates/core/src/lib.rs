//! Trace-driven batch scheduling simulator for machines with nodes, a shared
//! burst buffer and optional per-node SSDs.
//!
//! Each scheduling tick hands a window of queued jobs to a selection policy.
//! The `bbsched` policy searches the Pareto front of the window's resource
//! objectives with a genetic algorithm and picks a trade-off from it; the
//! others are simpler baselines.

pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod metrics;
pub mod model;
pub mod moo;
pub mod policies;
pub mod simulator;
pub mod trace;

pub use error::{Error, Result};

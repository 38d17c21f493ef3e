// SPDX-License-Identifier: Apache-2.0

//! Deterministic synchronous-round simulator for self-stabilizing protocols
//! whose random bits are turned off once convergence is detected.
//!
//! The crate ships Herman's token ring with history-based detectors and a
//! Byzantine-tolerant clock testbed whose random words come from other nodes.

pub mod clock;
pub mod engine;
pub mod herman;
pub mod history;
pub mod randomness;
pub mod scenario;
pub mod verify;

pub use engine::{
    run, run_until, step, ByzantineSpec, ByzantineStrategy, Configuration, ExecutionTrace, NodeId,
    Protocol, Round, SimFault, Topology,
};
pub use randomness::{BitSource, RandMeter, RandWord};

//! Incentivized packet relaying for wireless ad hoc networks.
//!
//! This crate simulates the FASTER protocol: relay nodes on a selected route
//! are treated as a coalition, the transmission power each relay saves under
//! the two-ray `d^4` propagation model is valued with the Shapley function,
//! and the resulting payoffs are settled in integer virtual currency carried
//! by a packet purse. A deterministic tick simulator compares FASTER against
//! a flat-pay baseline in terms of node richness and battery lifetime.
//!
//! Layout follows the pipeline:
//!
//! * [`geom`] — positions, routes, and the normalized `d^4` power model
//! * [`shapley`] — coalition values and exact Shapley payoffs
//! * [`topology`] — random geometric topologies and the stand-in router
//! * [`ledger`] — integer currency counters and the packet purse
//! * [`sim`] — the tick loop with coin-toss traffic and energy accounting
//! * [`config`] / [`metrics`] — experiment configuration, CSV emission,
//!   and the mode comparison used to reproduce the richness/lifetime plots

use std::fmt;

pub mod config;
pub mod geom;
pub mod ledger;
pub mod metrics;
pub mod shapley;
pub mod sim;
pub mod topology;

/// Identifier of a network node. Ids are dense (`0..n`) in generated
/// topologies but nothing in the library relies on that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(id: u32) -> Self {
        NodeId(id)
    }
}

//! Fault-tolerant request replication: closed-form reliability math, an
//! exact interface-to-server matcher, the replicating proxy and its wire
//! protocol, service discovery, replica fleet management and a seeded
//! discrete-event simulator.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discovery;
pub mod fleet;
pub mod matcher;
pub mod proxy;
pub mod reliability;
pub mod sim;

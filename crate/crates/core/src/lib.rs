//! Deterministic two-ledger simulator for atomic exchanges of co-owned
//! assets: the exchange model, simulated ledgers with hash-time locks, a
//! simulated fair MPC, the HTLC family of protocols and MPHTLC, an adversary
//! library, and the scenario harness.

pub mod adversary;
pub mod harness;
pub mod ledger;
pub mod model;
pub mod mpc;
pub mod protocol;

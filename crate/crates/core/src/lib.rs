//! Deterministic simulator and library for a permissioned resource-brokerage
//! ledger, built for network-slicing consortia.
//!
//! The pieces, bottom up:
//!
//! - [`codec`] — canonical binary encoding and content digests;
//! - [`ledger`] — signed transactions, hash-chained blocks, versioned world
//!   state, and optimistic concurrency validation;
//! - [`contracts`] — the built-in slice-transfer and auction contracts,
//!   executed by simulation against state snapshots;
//! - [`admission`] — exact, greedy, and exhaustive solvers for the broker's
//!   revenue-maximizing admission problem;
//! - [`ordering`] — solo, raft, and kafka-style ordering services over a
//!   simulated network;
//! - [`metrics`] — throughput, latency CDF, chain growth, and report export;
//! - [`workload`] — the two-phase benchmark scenario tying it all together.
//!
//! Every run is a pure function of its configuration and seed: same inputs,
//! byte-identical reports and chain dumps.

pub mod admission;
pub mod codec;
pub mod contracts;
pub mod ledger;
pub mod metrics;
pub mod ordering;
pub mod sim;
pub mod workload;

pub use codec::Digest;
pub use ledger::{Block, KeyPair, KeyStore, Ledger, Transaction, TxValidity, WorldState};
pub use ordering::{ConsensusKind, OrdererConfig};
pub use sim::SimTime;
pub use workload::{run_scenario, RunOutput, ScenarioConfig};

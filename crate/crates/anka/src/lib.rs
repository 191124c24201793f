//! Node, CLI and file formats for the ANKA energy marketplace.
//!
//! The deterministic ledger and contract live in `anka-core`; this crate
//! adds everything that touches the outside world: keystores, genesis and
//! log files, the JSON-RPC node, the trader CLI and the cost benchmark.

pub mod bench;
pub mod cli;
pub mod client;
pub mod config;
pub mod genesis;
pub mod keystore;
pub mod node;
pub mod rpc;
pub mod scenario;
pub mod txlog;

pub use anka_core as core;

//! Deterministic core of the ANKA energy marketplace.
//!
//! Everything in this crate is pure computation over owned state: the
//! simulated ledger ([`chain`]), the marketplace contract ([`market`]), the
//! geodesic helpers shared by clients ([`geo`]) and the fee arithmetic
//! ([`cost`]). No IO, no clocks, no entropy. The `anka` crate wraps it with
//! files, the node service and the CLI.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod address;
pub mod chain;
pub mod codec;
pub mod cost;
pub mod digest;
pub mod gas;
pub mod geo;
pub mod keys;
pub mod market;
pub mod serde_amount;
pub mod tx;

pub use address::Address;
pub use chain::{Account, Chain, GenesisConfig, LogEntry, Outcome, Receipt, ExecStatus, TxRejection};
pub use digest::Digest;
pub use gas::{GasMeter, GasSchedule, OutOfGas};
pub use geo::{haversine, filter_by_diameter, normalize_postal, DistanceMeters, GeoPoint, PostalCode};
pub use keys::{KeyPair, PublicKey, Signature};
pub use market::{EnergyOffer, Event, Market, MarketConfig, OfferStatus, RevertReason, UserProfile, VoltageClass};
pub use tx::{OfferSpec, Payload, SignedTransaction, Transaction};

/// Token base-units. One token is `10^9` base-units ("gwei-equivalent").
pub type Amount = u128;

/// Base-units per whole token.
pub const BASE_UNITS_PER_TOKEN: Amount = 1_000_000_000;

//! Gas schedule and metering.
//!
//! The default schedule is calibrated so that a listing, a purchase and the
//! contract deployment meter to fixed totals at `gas_price = 1`. Each
//! handler's base charge is its total minus the storage operations it
//! meters, so the storage/iteration costs stay realistic for the query
//! benchmarks while the end-to-end totals stay pinned.

use serde::{Deserialize, Serialize};

use crate::tx::Payload;

pub const STORAGE_WRITE_GAS: u64 = 5_000;
pub const STORAGE_READ_GAS: u64 = 200;
pub const ITERATION_GAS: u64 = 50;

/// Metered total for one listing at the default schedule.
pub const LIST_OFFER_TOTAL_GAS: u64 = 534_845;
/// Metered total for one purchase at the default schedule.
pub const BUY_OFFER_TOTAL_GAS: u64 = 72_934;
/// Metered total for the one-time contract deployment.
pub const DEPLOY_TOTAL_GAS: u64 = 3_282_000;

// Storage operations each handler meters on its success path.
pub(crate) const DEPLOY_OPS: StorageOps = StorageOps { reads: 1, writes: 1 };
pub(crate) const REGISTER_OPS: StorageOps = StorageOps { reads: 1, writes: 1 };
pub(crate) const LIST_OFFER_OPS: StorageOps = StorageOps { reads: 2, writes: 4 };
pub(crate) const BUY_OFFER_OPS: StorageOps = StorageOps { reads: 2, writes: 2 };
pub(crate) const CANCEL_OFFER_OPS: StorageOps = StorageOps { reads: 1, writes: 2 };

#[derive(Debug, Clone, Copy)]
pub(crate) struct StorageOps {
    pub reads: u64,
    pub writes: u64,
}

impl StorageOps {
    const fn cost(self) -> u64 {
        self.reads * STORAGE_READ_GAS + self.writes * STORAGE_WRITE_GAS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GasSchedule {
    pub deploy: u64,
    pub register: u64,
    pub list_offer: u64,
    pub buy_offer: u64,
    pub cancel_offer: u64,
    pub transfer: u64,
    pub storage_write: u64,
    pub storage_read: u64,
    pub iteration: u64,
}

impl Default for GasSchedule {
    fn default() -> Self {
        GasSchedule {
            deploy: DEPLOY_TOTAL_GAS - DEPLOY_OPS.cost(),
            register: 45_000,
            list_offer: LIST_OFFER_TOTAL_GAS - LIST_OFFER_OPS.cost(),
            buy_offer: BUY_OFFER_TOTAL_GAS - BUY_OFFER_OPS.cost(),
            cancel_offer: 25_000,
            transfer: 21_000,
            storage_write: STORAGE_WRITE_GAS,
            storage_read: STORAGE_READ_GAS,
            iteration: ITERATION_GAS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("gas schedule entry `{0}` must be strictly positive")]
pub struct InvalidSchedule(pub &'static str);

impl GasSchedule {
    pub fn validate(&self) -> Result<(), InvalidSchedule> {
        let entries = [
            ("deploy", self.deploy),
            ("register", self.register),
            ("list_offer", self.list_offer),
            ("buy_offer", self.buy_offer),
            ("cancel_offer", self.cancel_offer),
            ("transfer", self.transfer),
            ("storage_write", self.storage_write),
            ("storage_read", self.storage_read),
            ("iteration", self.iteration),
        ];
        match entries.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(InvalidSchedule(name)),
            None => Ok(()),
        }
    }

    fn ops(&self, ops: StorageOps) -> u64 {
        ops.reads * self.storage_read + ops.writes * self.storage_write
    }

    /// Gas a payload meters on its success path. Every successful
    /// transaction of a given kind uses exactly this much, which lets clients
    /// set `gas_limit` without estimating.
    pub fn success_gas(&self, payload: &Payload) -> u64 {
        match payload {
            Payload::Deploy => self.deploy + self.ops(DEPLOY_OPS),
            Payload::Register { .. } => self.register + self.ops(REGISTER_OPS),
            Payload::ListOffer(_) => self.list_offer + self.ops(LIST_OFFER_OPS),
            Payload::BuyOffer { .. } => self.buy_offer + self.ops(BUY_OFFER_OPS),
            Payload::CancelOffer { .. } => self.cancel_offer + self.ops(CANCEL_OFFER_OPS),
            Payload::Transfer { .. } => self.transfer,
        }
    }

    /// Cost of a metered read-only scan that looks up one storage slot and
    /// then visits `entries` records.
    pub fn scan_gas(&self, entries: u64) -> u64 {
        self.storage_read + entries * (self.storage_read + self.iteration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("out of gas")]
pub struct OutOfGas;

/// Running gas counter for one execution. Charges that would exceed the
/// limit fail without being applied.
#[derive(Debug, Clone)]
pub struct GasMeter {
    limit: u64,
    used: u64,
}

impl GasMeter {
    pub fn new(limit: u64) -> Self {
        GasMeter { limit, used: 0 }
    }

    /// Meter for read-only queries, which are measured but never capped.
    pub fn unbounded() -> Self {
        Self::new(u64::MAX)
    }

    pub fn charge(&mut self, gas: u64) -> Result<(), OutOfGas> {
        let next = self.used.checked_add(gas).ok_or(OutOfGas)?;
        if next > self.limit {
            return Err(OutOfGas);
        }
        self.used = next;
        Ok(())
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::OfferSpec;
    use crate::geo::GeoPoint;
    use alloc::string::String;
    use chrono::NaiveDate;

    #[test]
    fn default_schedule_hits_calibration_totals() {
        let g = GasSchedule::default();
        g.validate().unwrap();
        assert_eq!(g.success_gas(&Payload::Deploy), 3_282_000);
        assert_eq!(g.success_gas(&Payload::BuyOffer { offer_id: 0 }), 72_934);
        let spec = OfferSpec {
            energy_wh: 1,
            voltage: 5,
            price: 1,
            postal_code: String::from("34450"),
            location: GeoPoint::from_degrees(0.0, 0.0).unwrap(),
            offer_date: NaiveDate::from_ymd_opt(2026, 1, 1).unwrap(),
        };
        assert_eq!(g.success_gas(&Payload::ListOffer(spec)), 534_845);
        assert_eq!(g.storage_write, 5_000);
        assert_eq!(g.storage_read, 200);
        assert_eq!(g.iteration, 50);
    }

    #[test]
    fn zero_entry_is_invalid() {
        let g = GasSchedule { iteration: 0, ..GasSchedule::default() };
        assert_eq!(g.validate(), Err(InvalidSchedule("iteration")));
    }

    #[test]
    fn meter_refuses_charges_past_limit() {
        let mut m = GasMeter::new(100);
        m.charge(60).unwrap();
        assert_eq!(m.charge(41), Err(OutOfGas));
        assert_eq!(m.used(), 60);
        m.charge(40).unwrap();
        assert_eq!(m.used(), 100);
        assert_eq!(GasMeter::unbounded().charge(u64::MAX), Ok(()));
    }
}

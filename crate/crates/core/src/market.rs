//! The marketplace contract.
//!
//! Offers are stored densely by id and indexed under a composite
//! `(offer_date, postal_code)` key, so an area query only touches the one
//! bucket it needs. A per-date list of every listing backs the metered
//! linear scan that filters by distance instead.
//!
//! Handlers follow a check-then-effect discipline: every read, validation
//! and gas charge happens before the first mutation, so a revert (including
//! running out of gas) leaves storage untouched.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::address::Address;
use crate::codec::Encoder;
use crate::gas::{GasMeter, GasSchedule, OutOfGas};
use crate::geo::{haversine, normalize_postal, DistanceMeters, GeoPoint, Located, PostalCode};
use crate::tx::{OfferSpec, Payload};
use crate::Amount;

pub const MAX_NAME_CHARS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketConfig {
    /// Accepted nominal voltages.
    pub voltages: Vec<u32>,
    /// Offers may be dated from today up to `offer_window_days - 1` days
    /// ahead.
    pub offer_window_days: u32,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig { voltages: vec![5, 9, 12, 24, 36, 48], offer_window_days: 2 }
    }
}

impl MarketConfig {
    pub fn voltage(&self, volts: u32) -> Result<VoltageClass, RevertReason> {
        if volts > 0 && self.voltages.contains(&volts) {
            Ok(VoltageClass(volts))
        } else {
            Err(RevertReason::InvalidVoltage)
        }
    }
}

/// Nominal battery voltage. Buyer and seller are compatible iff equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoltageClass(u32);

impl VoltageClass {
    /// Unchecked against any whitelist; used for query filters.
    pub fn new(volts: u32) -> Self {
        VoltageClass(volts)
    }

    pub fn volts(self) -> u32 {
        self.0
    }
}

impl fmt::Display for VoltageClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}V", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub address: Address,
    pub display_name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum OfferStatus {
    Active,
    Sold { buyer: Address },
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyOffer {
    pub id: u64,
    pub seller: Address,
    pub energy_wh: u64,
    pub voltage: VoltageClass,
    #[serde(with = "crate::serde_amount")]
    pub price: Amount,
    pub postal_code: PostalCode,
    pub location: GeoPoint,
    pub offer_date: NaiveDate,
    pub status: OfferStatus,
}

impl EnergyOffer {
    pub fn is_active(&self) -> bool {
        self.status == OfferStatus::Active
    }
}

impl Located for EnergyOffer {
    fn location(&self) -> GeoPoint {
        self.location
    }
}

impl<T: Located> Located for &T {
    fn location(&self) -> GeoPoint {
        (*self).location()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, thiserror::Error)]
pub enum RevertReason {
    #[error("OutOfGas")]
    OutOfGas,
    #[error("NotDeployed")]
    NotDeployed,
    #[error("AlreadyDeployed")]
    AlreadyDeployed,
    #[error("AlreadyRegistered")]
    AlreadyRegistered,
    #[error("InvalidName")]
    InvalidName,
    #[error("NotRegistered")]
    NotRegistered,
    #[error("InvalidVoltage")]
    InvalidVoltage,
    #[error("InvalidPrice")]
    InvalidPrice,
    #[error("InvalidEnergy")]
    InvalidEnergy,
    #[error("InvalidPostalCode")]
    InvalidPostalCode,
    #[error("DateInPast")]
    DateInPast,
    #[error("DateOutOfWindow")]
    DateOutOfWindow,
    #[error("UnknownOffer")]
    UnknownOffer,
    #[error("OfferNotActive")]
    OfferNotActive,
    #[error("SelfPurchase")]
    SelfPurchase,
    #[error("NotSeller")]
    NotSeller,
    #[error("InsufficientFunds")]
    InsufficientFunds,
}

impl From<OutOfGas> for RevertReason {
    fn from(_: OutOfGas) -> Self {
        RevertReason::OutOfGas
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Event {
    Registered {
        address: Address,
        name: String,
    },
    OfferListed {
        offer: EnergyOffer,
    },
    OfferSold {
        offer_id: u64,
        seller: Address,
        buyer: Address,
        #[serde(with = "crate::serde_amount")]
        price: Amount,
        postal_code: PostalCode,
        offer_date: NaiveDate,
    },
    OfferCancelled {
        offer_id: u64,
        seller: Address,
        postal_code: PostalCode,
        offer_date: NaiveDate,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Registered { .. } => "Registered",
            Event::OfferListed { .. } => "OfferListed",
            Event::OfferSold { .. } => "OfferSold",
            Event::OfferCancelled { .. } => "OfferCancelled",
        }
    }

    pub fn postal_code(&self) -> Option<&PostalCode> {
        match self {
            Event::Registered { .. } => None,
            Event::OfferListed { offer } => Some(&offer.postal_code),
            Event::OfferSold { postal_code, .. } | Event::OfferCancelled { postal_code, .. } => Some(postal_code),
        }
    }

    pub fn offer_date(&self) -> Option<NaiveDate> {
        match self {
            Event::Registered { .. } => None,
            Event::OfferListed { offer } => Some(offer.offer_date),
            Event::OfferSold { offer_date, .. } | Event::OfferCancelled { offer_date, .. } => Some(*offer_date),
        }
    }
}

/// Caller-side facts the chain hands to the contract.
#[derive(Debug, Clone, Copy)]
pub struct ExecContext<'a> {
    pub sender: Address,
    pub today: NaiveDate,
    /// Sender balance left after reserving the maximum gas fee.
    pub spendable: Amount,
    pub schedule: &'a GasSchedule,
}

/// What a successful call asks the chain to do besides storage changes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Effects {
    pub events: Vec<Event>,
    /// `(from, to, amount)` value movement settled by the chain.
    pub value_transfer: Option<(Address, Address, Amount)>,
}

/// A read-only answer together with the gas its evaluation metered.
#[derive(Debug, Clone, PartialEq)]
pub struct Metered<T> {
    pub value: T,
    pub gas_used: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Market {
    config: MarketConfig,
    deployer: Option<Address>,
    profiles: BTreeMap<Address, UserProfile>,
    // Ids are dense, so position doubles as the id map.
    offers: Vec<EnergyOffer>,
    by_date_postal: BTreeMap<(NaiveDate, PostalCode), Vec<u64>>,
    by_date: BTreeMap<NaiveDate, Vec<u64>>,
}

impl Market {
    pub fn new(config: MarketConfig) -> Self {
        Market {
            config,
            deployer: None,
            profiles: BTreeMap::new(),
            offers: Vec::new(),
            by_date_postal: BTreeMap::new(),
            by_date: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &MarketConfig {
        &self.config
    }

    pub fn is_deployed(&self) -> bool {
        self.deployer.is_some()
    }

    pub fn deployer(&self) -> Option<Address> {
        self.deployer
    }

    pub fn profile(&self, address: &Address) -> Option<&UserProfile> {
        self.profiles.get(address)
    }

    pub fn offer(&self, id: u64) -> Option<&EnergyOffer> {
        usize::try_from(id).ok().and_then(|i| self.offers.get(i))
    }

    /// Every offer ever listed, in id order.
    pub fn offers(&self) -> &[EnergyOffer] {
        &self.offers
    }

    /// Ids stored in one `(date, postal)` bucket, in id order.
    pub fn bucket(&self, date: NaiveDate, postal: &PostalCode) -> &[u64] {
        self.by_date_postal.get(&(date, postal.clone())).map_or(&[], Vec::as_slice)
    }

    /// Active offers for a date in id order: the input a client-side area
    /// filter would download.
    pub fn active_offers_on(&self, date: NaiveDate) -> Vec<&EnergyOffer> {
        self.by_date
            .get(&date)
            .into_iter()
            .flatten()
            .map(|&id| &self.offers[id as usize])
            .filter(|o| o.is_active())
            .collect()
    }

    /// Value the sender must hold on top of the gas reservation.
    pub fn required_value(&self, payload: &Payload) -> Amount {
        match payload {
            Payload::BuyOffer { offer_id } => self.offer(*offer_id).map_or(0, |o| o.price),
            _ => 0,
        }
    }

    pub fn execute(
        &mut self,
        ctx: &ExecContext<'_>,
        payload: &Payload,
        gas: &mut GasMeter,
    ) -> Result<Effects, RevertReason> {
        match payload {
            Payload::Deploy => self.deploy(ctx, gas),
            Payload::Register { name } => self.register(ctx, name, gas),
            Payload::ListOffer(spec) => self.list_offer(ctx, spec, gas).map(|(_, fx)| fx),
            Payload::BuyOffer { offer_id } => self.buy_offer(ctx, *offer_id, gas),
            Payload::CancelOffer { offer_id } => self.cancel_offer(ctx, *offer_id, gas),
            Payload::Transfer { .. } => unreachable!("transfers are settled by the chain"),
        }
    }

    fn deploy(&mut self, ctx: &ExecContext<'_>, gas: &mut GasMeter) -> Result<Effects, RevertReason> {
        let g = ctx.schedule;
        gas.charge(g.deploy)?;
        gas.charge(g.storage_read)?;
        if self.is_deployed() {
            return Err(RevertReason::AlreadyDeployed);
        }
        gas.charge(g.storage_write)?;
        self.deployer = Some(ctx.sender);
        Ok(Effects::default())
    }

    fn register(&mut self, ctx: &ExecContext<'_>, name: &str, gas: &mut GasMeter) -> Result<Effects, RevertReason> {
        let g = ctx.schedule;
        gas.charge(g.register)?;
        self.require_deployed()?;
        let chars = name.chars().count();
        if chars == 0 || chars > MAX_NAME_CHARS {
            return Err(RevertReason::InvalidName);
        }
        gas.charge(g.storage_read)?;
        if self.profiles.contains_key(&ctx.sender) {
            return Err(RevertReason::AlreadyRegistered);
        }
        gas.charge(g.storage_write)?;

        let profile = UserProfile { address: ctx.sender, display_name: String::from(name) };
        self.profiles.insert(ctx.sender, profile);
        Ok(Effects {
            events: vec![Event::Registered { address: ctx.sender, name: String::from(name) }],
            value_transfer: None,
        })
    }

    fn list_offer(
        &mut self,
        ctx: &ExecContext<'_>,
        spec: &OfferSpec,
        gas: &mut GasMeter,
    ) -> Result<(u64, Effects), RevertReason> {
        let g = ctx.schedule;
        gas.charge(g.list_offer)?;
        self.require_deployed()?;
        gas.charge(g.storage_read)?;
        self.require_registered(&ctx.sender)?;

        let voltage = self.config.voltage(spec.voltage)?;
        if spec.price == 0 {
            return Err(RevertReason::InvalidPrice);
        }
        if spec.energy_wh == 0 {
            return Err(RevertReason::InvalidEnergy);
        }
        let postal_code = normalize_postal(&spec.postal_code).map_err(|_| RevertReason::InvalidPostalCode)?;
        if spec.offer_date < ctx.today {
            return Err(RevertReason::DateInPast);
        }
        let horizon = ctx.today.checked_add_days(Days::new(u64::from(self.config.offer_window_days)));
        if horizon.is_some_and(|h| spec.offer_date >= h) {
            return Err(RevertReason::DateOutOfWindow);
        }

        // next id, then: offer record, bucket append, per-date list, counter
        gas.charge(g.storage_read)?;
        gas.charge(4 * g.storage_write)?;

        let id = self.offers.len() as u64;
        let offer = EnergyOffer {
            id,
            seller: ctx.sender,
            energy_wh: spec.energy_wh,
            voltage,
            price: spec.price,
            postal_code: postal_code.clone(),
            location: spec.location,
            offer_date: spec.offer_date,
            status: OfferStatus::Active,
        };
        self.by_date_postal.entry((spec.offer_date, postal_code)).or_default().push(id);
        self.by_date.entry(spec.offer_date).or_default().push(id);
        self.offers.push(offer.clone());
        Ok((id, Effects { events: vec![Event::OfferListed { offer }], value_transfer: None }))
    }

    fn buy_offer(&mut self, ctx: &ExecContext<'_>, offer_id: u64, gas: &mut GasMeter) -> Result<Effects, RevertReason> {
        let g = ctx.schedule;
        gas.charge(g.buy_offer)?;
        self.require_deployed()?;
        gas.charge(g.storage_read)?;
        self.require_registered(&ctx.sender)?;
        gas.charge(g.storage_read)?;
        let offer = self.offer(offer_id).ok_or(RevertReason::UnknownOffer)?;
        if !offer.is_active() {
            return Err(RevertReason::OfferNotActive);
        }
        if offer.seller == ctx.sender {
            return Err(RevertReason::SelfPurchase);
        }
        if offer.price > ctx.spendable {
            return Err(RevertReason::InsufficientFunds);
        }
        // status, bucket removal
        gas.charge(2 * g.storage_write)?;

        let (seller, price) = (offer.seller, offer.price);
        let offer = self.close(offer_id, OfferStatus::Sold { buyer: ctx.sender });
        Ok(Effects {
            events: vec![Event::OfferSold {
                offer_id,
                seller,
                buyer: ctx.sender,
                price,
                postal_code: offer.postal_code.clone(),
                offer_date: offer.offer_date,
            }],
            value_transfer: Some((ctx.sender, seller, price)),
        })
    }

    fn cancel_offer(&mut self, ctx: &ExecContext<'_>, offer_id: u64, gas: &mut GasMeter) -> Result<Effects, RevertReason> {
        let g = ctx.schedule;
        gas.charge(g.cancel_offer)?;
        self.require_deployed()?;
        gas.charge(g.storage_read)?;
        let offer = self.offer(offer_id).ok_or(RevertReason::UnknownOffer)?;
        if offer.seller != ctx.sender {
            return Err(RevertReason::NotSeller);
        }
        if !offer.is_active() {
            return Err(RevertReason::OfferNotActive);
        }
        gas.charge(2 * g.storage_write)?;

        let offer = self.close(offer_id, OfferStatus::Cancelled);
        Ok(Effects {
            events: vec![Event::OfferCancelled {
                offer_id,
                seller: offer.seller,
                postal_code: offer.postal_code.clone(),
                offer_date: offer.offer_date,
            }],
            value_transfer: None,
        })
    }

    /// Moves an active offer to a terminal status and drops it from its
    /// bucket. Callers have already checked that it is active.
    fn close(&mut self, offer_id: u64, status: OfferStatus) -> &EnergyOffer {
        let offer = &mut self.offers[offer_id as usize];
        debug_assert!(offer.is_active());
        offer.status = status;
        let key = (offer.offer_date, offer.postal_code.clone());
        if let Some(bucket) = self.by_date_postal.get_mut(&key) {
            bucket.retain(|&id| id != offer_id);
            if bucket.is_empty() {
                self.by_date_postal.remove(&key);
            }
        }
        &self.offers[offer_id as usize]
    }

    fn require_deployed(&self) -> Result<(), RevertReason> {
        if self.is_deployed() {
            Ok(())
        } else {
            Err(RevertReason::NotDeployed)
        }
    }

    fn require_registered(&self, who: &Address) -> Result<(), RevertReason> {
        if self.profiles.contains_key(who) {
            Ok(())
        } else {
            Err(RevertReason::NotRegistered)
        }
    }

    /// Active offers in one bucket, optionally restricted to one voltage.
    /// Gas depends on the bucket's size alone.
    pub fn get_offers(
        &self,
        schedule: &GasSchedule,
        date: NaiveDate,
        postal: &PostalCode,
        voltage: Option<VoltageClass>,
    ) -> Metered<Vec<EnergyOffer>> {
        let mut gas = GasMeter::unbounded();
        let bucket = self.bucket(date, postal);
        let _ = gas.charge(schedule.scan_gas(bucket.len() as u64));
        let value = bucket
            .iter()
            .map(|&id| &self.offers[id as usize])
            .filter(|o| voltage.is_none_or(|v| o.voltage == v))
            .cloned()
            .collect();
        Metered { value, gas_used: gas.used() }
    }

    /// The contract-side linear area scan: visits every offer listed for
    /// `date` and keeps the active ones strictly closer than `diameter`.
    pub fn get_offers_by_diameter_onchain(
        &self,
        schedule: &GasSchedule,
        buyer: GeoPoint,
        diameter: DistanceMeters,
        date: NaiveDate,
    ) -> Metered<Vec<EnergyOffer>> {
        let ids = self.by_date.get(&date).map_or(&[][..], Vec::as_slice);
        let mut gas = GasMeter::unbounded();
        let _ = gas.charge(schedule.storage_read);
        let mut value = Vec::new();
        for &id in ids {
            let _ = gas.charge(schedule.storage_read + schedule.iteration);
            let offer = &self.offers[id as usize];
            if offer.is_active() && haversine(offer.location, buyer).meters() < diameter.meters() {
                value.push(offer.clone());
            }
        }
        Metered { value, gas_used: gas.used() }
    }

    pub(crate) fn encode_state(&self, e: &mut Encoder) {
        e.u32(self.config.voltages.len() as u32);
        for v in &self.config.voltages {
            e.u32(*v);
        }
        e.u32(self.config.offer_window_days);
        match self.deployer {
            Some(a) => e.u8(1).fixed(a.as_bytes()),
            None => e.u8(0),
        };
        e.u64(self.profiles.len() as u64);
        for p in self.profiles.values() {
            e.fixed(p.address.as_bytes()).str(&p.display_name);
        }
        e.u64(self.offers.len() as u64);
        for o in &self.offers {
            e.u64(o.id)
                .fixed(o.seller.as_bytes())
                .u64(o.energy_wh)
                .u32(o.voltage.0)
                .u128(o.price)
                .str(o.postal_code.as_str())
                .i32(o.location.lat_micro())
                .i32(o.location.lon_micro())
                .i32(o.offer_date.num_days_from_ce());
            match o.status {
                OfferStatus::Active => e.u8(0),
                OfferStatus::Sold { buyer } => e.u8(1).fixed(buyer.as_bytes()),
                OfferStatus::Cancelled => e.u8(2),
            };
        }
        e.u64(self.by_date_postal.len() as u64);
        for ((date, postal), ids) in &self.by_date_postal {
            e.i32(date.num_days_from_ce()).str(postal.as_str()).u32(ids.len() as u32);
            for id in ids {
                e.u64(*id);
            }
        }
        e.u64(self.by_date.len() as u64);
        for (date, ids) in &self.by_date {
            e.i32(date.num_days_from_ce()).u32(ids.len() as u32);
            for id in ids {
                e.u64(*id);
            }
        }
    }
}

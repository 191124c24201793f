//! Transactions and their canonical encoding.

use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::address::Address;
use crate::codec::{DecodeError, Decoder, Encoder};
use crate::digest::Digest;
use crate::geo::GeoPoint;
use crate::keys::{KeyPair, PublicKey, Signature};
use crate::Amount;

const SIGNING_DOMAIN: &[u8] = b"anka/tx/v1";
const HASH_DOMAIN: &[u8] = b"anka/tx-hash/v1";

/// Listing fields as submitted. The contract validates and normalizes them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfferSpec {
    pub energy_wh: u64,
    /// Nominal battery voltage in volts.
    pub voltage: u32,
    #[serde(with = "crate::serde_amount")]
    pub price: Amount,
    pub postal_code: String,
    pub location: GeoPoint,
    pub offer_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Deploy,
    Register { name: String },
    ListOffer(OfferSpec),
    BuyOffer { offer_id: u64 },
    CancelOffer { offer_id: u64 },
    Transfer {
        to: Address,
        #[serde(with = "crate::serde_amount")]
        amount: Amount,
    },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Deploy => "deploy",
            Payload::Register { .. } => "register",
            Payload::ListOffer(_) => "list_offer",
            Payload::BuyOffer { .. } => "buy_offer",
            Payload::CancelOffer { .. } => "cancel_offer",
            Payload::Transfer { .. } => "transfer",
        }
    }

    fn encode(&self, e: &mut Encoder) {
        match self {
            Payload::Deploy => {
                e.u8(0);
            }
            Payload::Register { name } => {
                e.u8(1).str(name);
            }
            Payload::ListOffer(o) => {
                e.u8(2)
                    .u64(o.energy_wh)
                    .u32(o.voltage)
                    .u128(o.price)
                    .str(&o.postal_code)
                    .i32(o.location.lat_micro())
                    .i32(o.location.lon_micro())
                    .i32(o.offer_date.num_days_from_ce());
            }
            Payload::BuyOffer { offer_id } => {
                e.u8(3).u64(*offer_id);
            }
            Payload::CancelOffer { offer_id } => {
                e.u8(4).u64(*offer_id);
            }
            Payload::Transfer { to, amount } => {
                e.u8(5).fixed(to.as_bytes()).u128(*amount);
            }
        }
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(match d.u8()? {
            0 => Payload::Deploy,
            1 => Payload::Register { name: d.string()? },
            2 => {
                let energy_wh = d.u64()?;
                let voltage = d.u32()?;
                let price = d.u128()?;
                let postal_code = d.string()?;
                let lat = d.i32()?;
                let lon = d.i32()?;
                let location = GeoPoint::from_micro(lat, lon).map_err(|_| DecodeError::Invalid("location"))?;
                let offer_date =
                    NaiveDate::from_num_days_from_ce_opt(d.i32()?).ok_or(DecodeError::Invalid("offer_date"))?;
                Payload::ListOffer(OfferSpec { energy_wh, voltage, price, postal_code, location, offer_date })
            }
            3 => Payload::BuyOffer { offer_id: d.u64()? },
            4 => Payload::CancelOffer { offer_id: d.u64()? },
            5 => Payload::Transfer { to: Address(d.fixed()?), amount: d.u128()? },
            tag => return Err(DecodeError::UnknownTag { what: "payload", tag }),
        })
    }
}

/// The signed portion of a transaction.
///
/// Addresses are hashes, so the sender's public key travels with the
/// transaction and must hash to `sender`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub sender: Address,
    pub public_key: PublicKey,
    pub nonce: u64,
    pub gas_limit: u64,
    pub gas_price: Amount,
    pub payload: Payload,
}

impl Transaction {
    pub fn new(keys: &KeyPair, nonce: u64, gas_limit: u64, gas_price: Amount, payload: Payload) -> Self {
        Transaction { sender: keys.address(), public_key: keys.public_key(), nonce, gas_limit, gas_price, payload }
    }

    fn encode_fields(&self, e: &mut Encoder) {
        e.fixed(self.sender.as_bytes())
            .fixed(self.public_key.as_bytes())
            .u64(self.nonce)
            .u64(self.gas_limit)
            .u128(self.gas_price);
        self.payload.encode(e);
    }

    /// Bytes covered by the signature: a domain tag followed by the
    /// canonical field encoding.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.fixed(SIGNING_DOMAIN);
        self.encode_fields(&mut e);
        e.into_bytes()
    }

    pub fn sign(self, keys: &KeyPair) -> SignedTransaction {
        let signature = keys.sign(&self.signing_bytes());
        SignedTransaction { tx: self, signature }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedTransaction {
    pub tx: Transaction,
    pub signature: Signature,
}

impl SignedTransaction {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        self.tx.encode_fields(&mut e);
        e.fixed(&self.signature.0);
        e.into_bytes()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut d = Decoder::new(bytes);
        let sender = Address(d.fixed()?);
        let public_key = PublicKey(d.fixed()?);
        let nonce = d.u64()?;
        let gas_limit = d.u64()?;
        let gas_price = d.u128()?;
        let payload = Payload::decode(&mut d)?;
        let signature = Signature(d.fixed()?);
        d.finish()?;
        Ok(SignedTransaction {
            tx: Transaction { sender, public_key, nonce, gas_limit, gas_price, payload },
            signature,
        })
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.encode())
    }

    pub fn from_hex(s: &str) -> Result<Self, DecodeError> {
        let body = s.trim().strip_prefix("0x").unwrap_or(s.trim());
        let bytes = hex::decode(body).map_err(|_| DecodeError::Invalid("hex"))?;
        Self::decode(&bytes)
    }

    pub fn hash(&self) -> Digest {
        Digest::tagged(HASH_DOMAIN, &self.encode())
    }

    /// True when the key hashes to the sender and the signature covers the
    /// transaction fields.
    pub fn is_authentic(&self) -> bool {
        Address::from_public_key(&self.tx.public_key) == self.tx.sender
            && self.tx.public_key.verify(&self.tx.signing_bytes(), &self.signature)
    }
}

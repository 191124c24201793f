#![allow(dead_code)]

use std::collections::HashMap;

use anka_core::chain::{GenesisConfig, Outcome};
use anka_core::{Address, Amount, Chain, GeoPoint, KeyPair, OfferSpec, Payload, Receipt, SignedTransaction, Transaction};
use chrono::NaiveDate;

pub const FUNDS: Amount = 10_000_000_000_000;

pub fn today() -> NaiveDate {
    NaiveDate::from_ymd_opt(2026, 10, 14).unwrap()
}

/// Chain with named, pre-funded actors and automatic nonces.
pub struct Harness {
    pub chain: Chain,
    pub genesis: GenesisConfig,
    keys: HashMap<String, KeyPair>,
    nonces: HashMap<Address, u64>,
    pub log: Vec<anka_core::LogEntry>,
}

impl Harness {
    pub fn new(actors: &[&str]) -> Self {
        Self::with_funds(actors, FUNDS)
    }

    pub fn with_funds(actors: &[&str], funds: Amount) -> Self {
        let mut genesis = GenesisConfig::new(today());
        let mut keys = HashMap::new();
        for a in actors {
            let kp = KeyPair::from_label(a);
            genesis = genesis.fund(kp.address(), funds);
            keys.insert(a.to_string(), kp);
        }
        Harness { chain: Chain::genesis(&genesis).unwrap(), genesis, keys, nonces: HashMap::new(), log: Vec::new() }
    }

    pub fn key(&self, actor: &str) -> KeyPair {
        self.keys.get(actor).cloned().unwrap_or_else(|| KeyPair::from_label(actor))
    }

    pub fn addr(&self, actor: &str) -> Address {
        self.key(actor).address()
    }

    pub fn balance(&self, actor: &str) -> Amount {
        self.chain.account(&self.addr(actor)).balance
    }

    pub fn sign(&mut self, actor: &str, payload: Payload) -> SignedTransaction {
        let limit = self.chain.schedule().success_gas(&payload);
        self.sign_with_limit(actor, payload, limit)
    }

    pub fn sign_with_limit(&mut self, actor: &str, payload: Payload, gas_limit: u64) -> SignedTransaction {
        let kp = self.key(actor);
        let nonce = *self.nonces.entry(kp.address()).or_insert(0);
        Transaction::new(&kp, nonce, gas_limit, 1, payload).sign(&kp)
    }

    pub fn submit(&mut self, stx: &SignedTransaction) -> Outcome {
        self.log.push(anka_core::LogEntry { date: self.chain.today(), tx: stx.clone() });
        let out = self.chain.submit(stx);
        if out.is_ok() {
            *self.nonces.entry(stx.tx.sender).or_insert(0) += 1;
        }
        out
    }

    pub fn exec(&mut self, actor: &str, payload: Payload) -> Outcome {
        let stx = self.sign(actor, payload);
        self.submit(&stx)
    }

    pub fn ok(&mut self, actor: &str, payload: Payload) -> Receipt {
        let r = self.exec(actor, payload).expect("accepted");
        assert!(r.is_success(), "{actor}: {:?}", r.status);
        r
    }

    pub fn deploy(&mut self, actor: &str) {
        self.ok(actor, Payload::Deploy);
    }

    pub fn register(&mut self, actor: &str) {
        self.ok(actor, Payload::Register { name: actor.to_string() });
    }
}

pub fn spec(voltage: u32, price: Amount, postal: &str, lat: f64, lon: f64, date: NaiveDate) -> OfferSpec {
    OfferSpec {
        energy_wh: 500,
        voltage,
        price,
        postal_code: postal.to_string(),
        location: GeoPoint::from_degrees(lat, lon).unwrap(),
        offer_date: date,
    }
}

pub fn total(chain: &Chain) -> Amount {
    chain.total_balances() + chain.fee_sink()
}

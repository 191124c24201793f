#![allow(dead_code)]

pub mod audit;

use std::path::PathBuf;

use anka::client::{prepare_with, RpcClient};
use anka::config::{Clock, NodeConfig};
use anka::node::{spawn_with, NodeHandle};
use anka_core::chain::{GenesisConfig, DEV_FAUCET_LABEL};
use anka_core::{Amount, GeoPoint, KeyPair, OfferSpec, Payload, Receipt};
use chrono::NaiveDate;

pub fn today() -> NaiveDate {
    NaiveDate::from_ymd_opt(2026, 10, 14).unwrap()
}

pub fn start_node() -> NodeHandle {
    start_node_with(GenesisConfig::dev(today()))
}

pub fn start_node_with(genesis: GenesisConfig) -> NodeHandle {
    let config = NodeConfig {
        listen: "127.0.0.1:0".parse().unwrap(),
        clock: Clock::Fixed(Some(genesis.date)),
        ..NodeConfig::default()
    };
    spawn_with(genesis, &config).expect("node starts")
}

pub fn faucet() -> KeyPair {
    KeyPair::from_label(DEV_FAUCET_LABEL)
}

pub fn send(client: &RpcClient, keys: &KeyPair, payload: Payload) -> Receipt {
    let stx = client.prepare(keys, payload).unwrap();
    client.send_transaction(&stx).unwrap()
}

pub fn ok(client: &RpcClient, keys: &KeyPair, payload: Payload) -> Receipt {
    let r = send(client, keys, payload);
    assert!(r.is_success(), "{:?}", r.status);
    r
}

pub fn fund(client: &RpcClient, to: &KeyPair, amount: Amount) {
    ok(client, &faucet(), Payload::Transfer { to: to.address(), amount });
}

/// Deploys the market and registers `names`, funding each.
pub fn setup_market(client: &RpcClient, names: &[&str]) -> Vec<KeyPair> {
    let operator = KeyPair::from_label("operator");
    fund(client, &operator, 10_000_000_000);
    ok(client, &operator, Payload::Deploy);
    names
        .iter()
        .map(|n| {
            let k = KeyPair::from_label(n);
            fund(client, &k, 10_000_000_000);
            ok(client, &k, Payload::Register { name: n.to_string() });
            k
        })
        .collect()
}

pub fn offer(voltage: u32, price: Amount, postal: &str, lat: f64, lon: f64) -> Payload {
    Payload::ListOffer(OfferSpec {
        energy_wh: 500,
        voltage,
        price,
        postal_code: postal.into(),
        location: GeoPoint::from_degrees(lat, lon).unwrap(),
        offer_date: today(),
    })
}

pub fn signed(client: &RpcClient, keys: &KeyPair, nonce: u64, payload: Payload) -> anka_core::SignedTransaction {
    prepare_with(keys, nonce, &client.chain_info().unwrap().gas, payload)
}

pub fn repo_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

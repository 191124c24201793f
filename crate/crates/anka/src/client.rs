//! Blocking JSON-RPC client and server-sent-events reader.

use std::io::{BufRead, BufReader};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use anka_core::chain::GenesisConfig;
use anka_core::{
    Account, Address, Amount, Digest, EnergyOffer, GasSchedule, GeoPoint, KeyPair, MarketConfig, Payload, PostalCode,
    Receipt, SignedTransaction, Transaction, TxRejection, UserProfile,
};
use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::node::{EventEnvelope, EventFilter};
use crate::rpc::{OffersResult, RpcError, NOT_FOUND, TX_REJECTED};
use crate::txlog::{LogRecord, TxLog};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("cannot reach node: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("transaction rejected: {0}")]
    Rejected(TxRejection),
    #[error(transparent)]
    Rpc(RpcError),
    #[error("malformed node response: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ChainInfo {
    pub height: u64,
    pub today: NaiveDate,
    pub clock: String,
    pub deployed: bool,
    pub deployer: Option<Address>,
    pub offers: u64,
    #[serde(with = "anka_core::serde_amount")]
    pub fee_sink: Amount,
    #[serde(with = "anka_core::serde_amount")]
    pub supply: Amount,
    pub gas: GasSchedule,
    pub market: MarketConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct StateHash {
    pub height: u64,
    pub state_hash: Digest,
}

#[derive(Debug, Deserialize)]
struct LogPage {
    total: usize,
    genesis: GenesisConfig,
    records: Vec<LogRecord>,
}

pub struct RpcClient {
    url: String,
    http: reqwest::blocking::Client,
    next_id: AtomicU64,
}

impl RpcClient {
    pub fn new(base_url: &str) -> Self {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .expect("http client");
        RpcClient { url: base_url.trim_end_matches('/').to_string(), http, next_id: AtomicU64::new(1) }
    }

    pub fn base_url(&self) -> &str {
        &self.url
    }

    pub fn call_raw(&self, method: &str, params: Value) -> Result<Value, ClientError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let body = json!({"jsonrpc": "2.0", "method": method, "params": params, "id": id});
        let mut resp: Value = self.http.post(format!("{}/rpc", self.url)).json(&body).send()?.error_for_status()?.json()?;
        if let Some(err) = resp.get_mut("error") {
            let err: RpcError = serde_json::from_value(err.take()).map_err(|e| ClientError::Decode(e.to_string()))?;
            if err.code == TX_REJECTED {
                if let Some(rej) = err.data.clone().and_then(|d| serde_json::from_value(d).ok()) {
                    return Err(ClientError::Rejected(rej));
                }
            }
            return Err(ClientError::Rpc(err));
        }
        resp.get_mut("result").map(Value::take).ok_or_else(|| ClientError::Decode("no result".into()))
    }

    pub fn call<T: DeserializeOwned>(&self, method: &str, params: Value) -> Result<T, ClientError> {
        serde_json::from_value(self.call_raw(method, params)?).map_err(|e| ClientError::Decode(e.to_string()))
    }

    fn optional<T: DeserializeOwned>(&self, method: &str, params: Value) -> Result<Option<T>, ClientError> {
        match self.call(method, params) {
            Ok(v) => Ok(Some(v)),
            Err(ClientError::Rpc(e)) if e.code == NOT_FOUND => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn send_transaction(&self, stx: &SignedTransaction) -> Result<Receipt, ClientError> {
        self.call("send_transaction", json!({"tx": stx.to_hex()}))
    }

    pub fn chain_info(&self) -> Result<ChainInfo, ClientError> {
        self.call("chain_info", Value::Null)
    }

    pub fn state_hash(&self) -> Result<StateHash, ClientError> {
        self.call("state_hash", Value::Null)
    }

    pub fn account(&self, address: &Address) -> Result<Account, ClientError> {
        self.call("get_account", json!({"address": address}))
    }

    pub fn profile(&self, address: &Address) -> Result<Option<UserProfile>, ClientError> {
        self.optional("get_profile", json!({"address": address}))
    }

    pub fn offer(&self, id: u64) -> Result<Option<EnergyOffer>, ClientError> {
        self.optional("get_offer", json!({"offer_id": id}))
    }

    pub fn offers(&self, date: Option<NaiveDate>, postal: &PostalCode, voltage: Option<u32>) -> Result<OffersResult, ClientError> {
        self.call("get_offers", json!({"date": date, "postal_code": postal, "voltage": voltage}))
    }

    pub fn offers_in_area(&self, date: Option<NaiveDate>, at: GeoPoint, diameter_m: f64) -> Result<OffersResult, ClientError> {
        self.call("get_offers_in_area", json!({"date": date, "location": at, "diameter_m": diameter_m}))
    }

    pub fn set_date(&self, date: NaiveDate) -> Result<NaiveDate, ClientError> {
        #[derive(Deserialize)]
        struct R {
            today: NaiveDate,
        }
        Ok(self.call::<R>("set_date", json!({"date": date}))?.today)
    }

    pub fn subscribe(&self, filter: &EventFilter) -> Result<u64, ClientError> {
        #[derive(Deserialize)]
        struct R {
            subscription: u64,
        }
        Ok(self.call::<R>("subscribe", serde_json::to_value(filter).expect("serializes"))?.subscription)
    }

    /// The node's full submission log, fetched page by page.
    pub fn log(&self) -> Result<TxLog, ClientError> {
        let mut log = TxLog::default();
        loop {
            let page: LogPage = self.call("get_log", json!({"from": log.records.len()}))?;
            log.genesis = Some(page.genesis);
            let done = page.records.is_empty() || log.records.len() + page.records.len() >= page.total;
            log.records.extend(page.records);
            if done {
                return Ok(log);
            }
        }
    }

    /// Signs `payload` with the sender's next nonce and a gas limit that
    /// exactly covers the success path.
    pub fn prepare(&self, keys: &KeyPair, payload: Payload) -> Result<SignedTransaction, ClientError> {
        let schedule = self.chain_info()?.gas;
        let nonce = self.account(&keys.address())?.nonce;
        Ok(prepare_with(keys, nonce, &schedule, payload))
    }

    /// Opens an event stream for an existing subscription.
    pub fn events(&self, subscription: u64) -> Result<EventStream, ClientError> {
        let resp = reqwest::blocking::Client::builder()
            .build()?
            .get(format!("{}/events", self.url))
            .query(&[("subscription", subscription)])
            .send()?
            .error_for_status()?;
        Ok(EventStream { lines: BufReader::new(resp) })
    }
}

pub fn prepare_with(keys: &KeyPair, nonce: u64, schedule: &GasSchedule, payload: Payload) -> SignedTransaction {
    let gas_limit = schedule.success_gas(&payload);
    Transaction::new(keys, nonce, gas_limit, 1, payload).sign(keys)
}

/// Iterator over envelopes from `GET /events`. Ends when the node closes
/// the stream.
pub struct EventStream {
    lines: BufReader<reqwest::blocking::Response>,
}

impl Iterator for EventStream {
    type Item = Result<EventEnvelope, ClientError>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut data = String::new();
        loop {
            let mut line = String::new();
            match self.lines.read_line(&mut line) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(ClientError::Decode(e.to_string()))),
            }
            let line = line.trim_end_matches(['\r', '\n']);
            if line.is_empty() {
                if data.is_empty() {
                    continue;
                }
                return Some(serde_json::from_str(&data).map_err(|e| ClientError::Decode(e.to_string())));
            }
            if let Some(d) = line.strip_prefix("data:") {
                data.push_str(d.strip_prefix(' ').unwrap_or(d));
            }
        }
    }
}

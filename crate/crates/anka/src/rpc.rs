//! JSON-RPC 2.0 method dispatch over a [`NodeCore`].

use anka_core::geo::GeoPoint;
use anka_core::{Address, DistanceMeters, EnergyOffer, PostalCode, SignedTransaction, VoltageClass};
use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Clock;
use crate::node::{EventFilter, NodeCore};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const INTERNAL_ERROR: i64 = -32603;
/// Transaction refused before execution; `message` is the reason name.
pub const TX_REJECTED: i64 = -32000;
/// `set_date` refused: clock not fixed, or the date would move backwards.
pub const CLOCK_ERROR: i64 = -32001;
pub const NOT_FOUND: i64 = -32004;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

impl RpcError {
    pub fn new(code: i64, message: impl Into<String>) -> Self {
        RpcError { code, message: message.into(), data: None }
    }

    fn params(e: impl std::fmt::Display) -> Self {
        Self::new(INVALID_PARAMS, format!("invalid params: {e}"))
    }
}

impl std::fmt::Display for RpcError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "rpc error {}: {}", self.code, self.message)
    }
}

impl std::error::Error for RpcError {}

#[derive(Debug, Deserialize)]
struct Request {
    jsonrpc: Option<String>,
    method: Value,
    #[serde(default)]
    params: Value,
    id: Option<Value>,
}

fn response(id: Value, result: Result<Value, RpcError>) -> Value {
    match result {
        Ok(r) => json!({"jsonrpc": "2.0", "id": id, "result": r}),
        Err(e) => json!({"jsonrpc": "2.0", "id": id, "error": e}),
    }
}

/// Handles a raw request body: one call or a batch. `None` when every call
/// was a notification.
pub async fn handle_text(core: &NodeCore, body: &str) -> Option<Value> {
    let value: Value = match serde_json::from_str(body) {
        Ok(v) => v,
        Err(e) => return Some(response(Value::Null, Err(RpcError::new(PARSE_ERROR, format!("parse error: {e}"))))),
    };
    match value {
        Value::Array(calls) if calls.is_empty() => {
            Some(response(Value::Null, Err(RpcError::new(INVALID_REQUEST, "empty batch"))))
        }
        Value::Array(calls) => {
            let mut out = Vec::new();
            for c in calls {
                if let Some(r) = handle_value(core, c).await {
                    out.push(r);
                }
            }
            (!out.is_empty()).then_some(Value::Array(out))
        }
        v => handle_value(core, v).await,
    }
}

async fn handle_value(core: &NodeCore, value: Value) -> Option<Value> {
    let req: Request = match serde_json::from_value(value) {
        Ok(r) => r,
        Err(e) => return Some(response(Value::Null, Err(RpcError::new(INVALID_REQUEST, format!("invalid request: {e}"))))),
    };
    let id = req.id.clone();
    let result = match (&req.jsonrpc, &req.method) {
        (Some(v), Value::String(m)) if v == "2.0" => dispatch(core, m, req.params).await,
        _ => Err(RpcError::new(INVALID_REQUEST, "invalid request: need jsonrpc \"2.0\" and a string method")),
    };
    id.map(|id| response(id, result))
}

fn parse<T: DeserializeOwned>(params: Value) -> Result<T, RpcError> {
    let params = if params.is_null() { json!({}) } else { params };
    serde_json::from_value(params).map_err(RpcError::params)
}

fn to_value<T: Serialize>(v: T) -> Result<Value, RpcError> {
    serde_json::to_value(v).map_err(|e| RpcError::new(INTERNAL_ERROR, e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SendTx {
    tx: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GetOffers {
    date: Option<NaiveDate>,
    postal_code: String,
    voltage: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GetOffersInArea {
    date: Option<NaiveDate>,
    location: GeoPoint,
    diameter_m: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OfferId {
    offer_id: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AddressParam {
    address: Address,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GetLog {
    #[serde(default)]
    from: usize,
    limit: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubscriptionId {
    subscription: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SetDate {
    date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffersResult {
    pub date: NaiveDate,
    pub offers: Vec<EnergyOffer>,
    pub gas_used: u64,
}

fn postal(raw: &str) -> Result<PostalCode, RpcError> {
    anka_core::normalize_postal(raw).map_err(|e| RpcError::params(format!("postal_code: {e}")))
}

pub const MAX_LOG_PAGE: usize = 10_000;

pub async fn dispatch(core: &NodeCore, method: &str, params: Value) -> Result<Value, RpcError> {
    match method {
        "send_transaction" => {
            let p: SendTx = parse(params)?;
            let stx = SignedTransaction::from_hex(&p.tx).map_err(|e| RpcError::params(format!("tx: {e}")))?;
            let outcome = core.submit(stx).await.map_err(|e| RpcError::new(INTERNAL_ERROR, e.to_string()))?;
            match outcome {
                Ok(receipt) => to_value(receipt),
                Err(rej) => Err(RpcError { code: TX_REJECTED, message: rej.name().into(), data: Some(to_value(rej)?) }),
            }
        }
        "get_offers" => {
            let p: GetOffers = parse(params)?;
            let code = postal(&p.postal_code)?;
            core.read(|c| {
                let date = p.date.unwrap_or(c.today());
                let voltage = p.voltage.map(VoltageClass::new);
                let m = c.market().get_offers(c.schedule(), date, &code, voltage);
                to_value(OffersResult { date, offers: m.value, gas_used: m.gas_used })
            })
        }
        "get_offers_in_area" => {
            let p: GetOffersInArea = parse(params)?;
            let diameter = DistanceMeters::new(p.diameter_m).map_err(RpcError::params)?;
            core.read(|c| {
                let date = p.date.unwrap_or(c.today());
                let m = c.market().get_offers_by_diameter_onchain(c.schedule(), p.location, diameter, date);
                to_value(OffersResult { date, offers: m.value, gas_used: m.gas_used })
            })
        }
        "get_offer" => {
            let p: OfferId = parse(params)?;
            core.read(|c| c.market().offer(p.offer_id).cloned())
                .map_or_else(|| Err(RpcError::new(NOT_FOUND, format!("offer {} not found", p.offer_id))), to_value)
        }
        "get_account" => {
            let p: AddressParam = parse(params)?;
            to_value(core.read(|c| c.account(&p.address)))
        }
        "get_profile" => {
            let p: AddressParam = parse(params)?;
            core.read(|c| c.market().profile(&p.address).cloned())
                .map_or_else(|| Err(RpcError::new(NOT_FOUND, format!("{} is not registered", p.address))), to_value)
        }
        "state_hash" => Ok(core.read(|c| json!({"height": c.height(), "state_hash": c.state_hash()}))),
        "chain_info" => core.read(|c| {
            Ok(json!({
                "height": c.height(),
                "today": c.today(),
                "clock": match core.clock() { Clock::System => "system", Clock::Fixed(_) => "fixed" },
                "deployed": c.market().is_deployed(),
                "deployer": c.market().deployer(),
                "offers": c.market().offers().len(),
                "fee_sink": c.fee_sink().to_string(),
                "supply": c.supply().to_string(),
                "gas": to_value(c.schedule())?,
                "market": to_value(c.market().config())?,
            }))
        }),
        "get_log" => {
            let p: GetLog = parse(params)?;
            let limit = p.limit.unwrap_or(MAX_LOG_PAGE).min(MAX_LOG_PAGE);
            let (total, records) = core.history(p.from, limit);
            Ok(json!({"total": total, "from": p.from, "genesis": to_value(core.genesis())?, "records": to_value(records)?}))
        }
        "subscribe" => {
            let filter: EventFilter = parse(params)?;
            Ok(json!({"subscription": core.subscribe(filter)}))
        }
        "unsubscribe" => {
            let p: SubscriptionId = parse(params)?;
            Ok(json!({"removed": core.unsubscribe(p.subscription)}))
        }
        "set_date" => {
            let p: SetDate = parse(params)?;
            if core.clock() == Clock::System {
                return Err(RpcError::new(CLOCK_ERROR, "node follows the system clock"));
            }
            match core.set_date(p.date).await.map_err(|e| RpcError::new(INTERNAL_ERROR, e.to_string()))? {
                Ok(d) => Ok(json!({"today": d})),
                Err(e) => Err(RpcError::new(CLOCK_ERROR, e.to_string())),
            }
        }
        other => Err(RpcError::new(METHOD_NOT_FOUND, format!("method not found: {other}"))),
    }
}

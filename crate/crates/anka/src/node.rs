//! The node: one sequencer thread owns all writes; readers take snapshots
//! under a read lock. Served over HTTP as `POST /rpc` (JSON-RPC 2.0) and
//! `GET /events` (server-sent events).

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;

use anka_core::chain::{DateRegression, GenesisConfig};
use anka_core::{Chain, Digest, Event, Outcome, PostalCode, SignedTransaction};
use axum::extract::{Query, State};
use axum::response::sse::{KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{NaiveDate, Utc};
use futures::Stream;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc as tmpsc, oneshot};
use tokio_stream::StreamExt;

use crate::config::{Clock, NodeConfig};
use crate::rpc;
use crate::txlog::{LogRecord, LogWriter, TxLogError};

/// An event as delivered to subscribers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventEnvelope {
    pub block_height: u64,
    pub tx_hash: Digest,
    pub event: Event,
}

/// Which events a subscriber wants. Empty lists mean "any".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventFilter {
    pub kinds: Vec<String>,
    pub postal_codes: Vec<PostalCode>,
    pub dates: Vec<NaiveDate>,
}

impl EventFilter {
    pub fn matches(&self, event: &Event) -> bool {
        (self.kinds.is_empty() || self.kinds.iter().any(|k| k == event.kind()))
            && (self.postal_codes.is_empty() || event.postal_code().is_some_and(|p| self.postal_codes.contains(p)))
            && (self.dates.is_empty() || event.offer_date().is_some_and(|d| self.dates.contains(&d)))
    }
}

struct Subscription {
    filter: EventFilter,
    tx: tmpsc::UnboundedSender<EventEnvelope>,
    // Held until an SSE stream claims it; events queue up meanwhile.
    rx: Option<tmpsc::UnboundedReceiver<EventEnvelope>>,
}

#[derive(Default)]
struct Subscriptions {
    next: u64,
    live: HashMap<u64, Subscription>,
}

enum Command {
    Submit(Box<SignedTransaction>, oneshot::Sender<Outcome>),
    SetDate(NaiveDate, oneshot::Sender<Result<NaiveDate, DateRegression>>),
}

#[derive(Debug, thiserror::Error)]
pub enum NodeError {
    #[error("genesis: {0}")]
    Genesis(#[from] anka_core::chain::GenesisError),
    #[error("genesis date: {0}")]
    Date(#[from] DateRegression),
    #[error(transparent)]
    Genesisfile(#[from] crate::genesis::GenesisFileError),
    #[error(transparent)]
    Log(#[from] TxLogError),
    #[error("bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("sequencer stopped")]
    Stopped,
}

/// Shared node state. Usable in-process without HTTP.
pub struct NodeCore {
    genesis: GenesisConfig,
    clock: Clock,
    chain: RwLock<Chain>,
    history: RwLock<Vec<LogRecord>>,
    subs: Mutex<Subscriptions>,
    commands: Mutex<mpsc::Sender<Command>>,
    submissions: AtomicU64,
}

impl NodeCore {
    /// Starts the sequencer thread.
    pub fn start(genesis: GenesisConfig, clock: Clock, log: Option<&Path>) -> Result<Arc<Self>, NodeError> {
        let mut chain = Chain::genesis(&genesis)?;
        match clock {
            Clock::Fixed(Some(d)) => chain.set_date(d)?,
            Clock::Fixed(None) => {}
            Clock::System => chain.set_date(Utc::now().date_naive().max(chain.today()))?,
        }
        let mut writer = log.map(|p| LogWriter::create(p, Some(&genesis))).transpose()?;
        let (tx, rx) = mpsc::channel::<Command>();
        let core = Arc::new(NodeCore {
            genesis,
            clock,
            chain: RwLock::new(chain),
            history: RwLock::new(Vec::new()),
            subs: Mutex::new(Subscriptions::default()),
            commands: Mutex::new(tx),
            submissions: AtomicU64::new(0),
        });
        let weak = Arc::downgrade(&core);
        thread::Builder::new()
            .name("anka-sequencer".into())
            .spawn(move || {
                while let Ok(cmd) = rx.recv() {
                    let Some(core) = weak.upgrade() else { break };
                    core.apply(cmd, writer.as_mut());
                }
            })
            .expect("spawn sequencer");
        Ok(core)
    }

    fn apply(&self, cmd: Command, writer: Option<&mut LogWriter>) {
        match cmd {
            Command::SetDate(date, reply) => {
                let _ = reply.send(self.chain.write().set_date(date).map(|()| date));
            }
            Command::Submit(stx, reply) => {
                let (date, outcome) = {
                    let mut chain = self.chain.write();
                    if self.clock == Clock::System {
                        let now = Utc::now().date_naive();
                        if now > chain.today() {
                            chain.set_date(now).expect("forward");
                        }
                    }
                    (chain.today(), chain.submit(&stx))
                };
                let record = LogRecord::new(date, &stx, Some(&outcome));
                if let Some(w) = writer {
                    if let Err(e) = w.append(&record) {
                        eprintln!("anka node: log write failed: {e}");
                    }
                }
                self.history.write().push(record);
                self.submissions.fetch_add(1, Ordering::Relaxed);
                if let Ok(receipt) = &outcome {
                    self.publish(receipt.block_height, receipt.tx_hash, &receipt.events);
                }
                let _ = reply.send(outcome);
            }
        }
    }

    fn publish(&self, block_height: u64, tx_hash: Digest, events: &[Event]) {
        if events.is_empty() {
            return;
        }
        let mut subs = self.subs.lock();
        subs.live.retain(|_, s| {
            for event in events.iter().filter(|e| s.filter.matches(e)) {
                let env = EventEnvelope { block_height, tx_hash, event: event.clone() };
                if s.tx.send(env).is_err() {
                    return false;
                }
            }
            true
        });
    }

    fn send(&self, cmd: Command) -> Result<(), NodeError> {
        self.commands.lock().send(cmd).map_err(|_| NodeError::Stopped)
    }

    /// Queues a transaction and waits for the sequencer's verdict.
    pub async fn submit(&self, stx: SignedTransaction) -> Result<Outcome, NodeError> {
        let (tx, rx) = oneshot::channel();
        self.send(Command::Submit(Box::new(stx), tx))?;
        rx.await.map_err(|_| NodeError::Stopped)
    }

    pub async fn set_date(&self, date: NaiveDate) -> Result<Result<NaiveDate, DateRegression>, NodeError> {
        let (tx, rx) = oneshot::channel();
        self.send(Command::SetDate(date, tx))?;
        rx.await.map_err(|_| NodeError::Stopped)
    }

    /// Runs `f` against a consistent snapshot of the chain.
    pub fn read<R>(&self, f: impl FnOnce(&Chain) -> R) -> R {
        f(&self.chain.read())
    }

    pub fn genesis(&self) -> &GenesisConfig {
        &self.genesis
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn history(&self, from: usize, limit: usize) -> (usize, Vec<LogRecord>) {
        let h = self.history.read();
        let start = from.min(h.len());
        let end = start.saturating_add(limit).min(h.len());
        (h.len(), h[start..end].to_vec())
    }

    pub fn subscribe(&self, filter: EventFilter) -> u64 {
        let (tx, rx) = tmpsc::unbounded_channel();
        let mut subs = self.subs.lock();
        subs.next += 1;
        let id = subs.next;
        subs.live.insert(id, Subscription { filter, tx, rx: Some(rx) });
        id
    }

    pub fn unsubscribe(&self, id: u64) -> bool {
        self.subs.lock().live.remove(&id).is_some()
    }

    /// Hands out the receiving end of a subscription, once.
    pub fn claim(&self, id: u64) -> Option<tmpsc::UnboundedReceiver<EventEnvelope>> {
        self.subs.lock().live.get_mut(&id)?.rx.take()
    }
}

fn load_genesis(config: &NodeConfig) -> Result<GenesisConfig, NodeError> {
    Ok(match &config.genesis {
        Some(p) => crate::genesis::load(p)?,
        None => {
            let date = match config.clock {
                Clock::Fixed(Some(d)) => d,
                _ => Utc::now().date_naive(),
            };
            GenesisConfig::dev(date)
        }
    })
}

pub fn router(core: Arc<NodeCore>) -> Router {
    // Browser clients are served from elsewhere, so any origin may call in.
    Router::new()
        .route("/rpc", post(rpc_handler))
        .route("/events", get(events_handler))
        .layer(tower_http::cors::CorsLayer::permissive())
        .with_state(core)
}

async fn rpc_handler(State(core): State<Arc<NodeCore>>, body: String) -> Response {
    match rpc::handle_text(&core, &body).await {
        Some(v) => Json(v).into_response(),
        None => axum::http::StatusCode::NO_CONTENT.into_response(),
    }
}

#[derive(Debug, Default, Deserialize)]
struct EventsQuery {
    subscription: Option<u64>,
    kinds: Option<String>,
    postal_codes: Option<String>,
    dates: Option<String>,
}

fn split_csv(s: &Option<String>) -> impl Iterator<Item = &str> {
    s.as_deref().unwrap_or("").split(',').map(str::trim).filter(|x| !x.is_empty())
}

impl EventsQuery {
    fn filter(&self) -> Result<EventFilter, String> {
        Ok(EventFilter {
            kinds: split_csv(&self.kinds).map(String::from).collect(),
            postal_codes: split_csv(&self.postal_codes)
                .map(|p| anka_core::normalize_postal(p).map_err(|e| format!("{p}: {e}")))
                .collect::<Result<_, _>>()?,
            dates: split_csv(&self.dates)
                .map(|d| d.parse().map_err(|e| format!("{d}: {e}")))
                .collect::<Result<_, _>>()?,
        })
    }
}

async fn events_handler(State(core): State<Arc<NodeCore>>, Query(q): Query<EventsQuery>) -> Response {
    use axum::http::StatusCode;
    let (id, rx) = match q.subscription {
        Some(id) => match core.claim(id) {
            Some(rx) => (id, rx),
            None => return (StatusCode::NOT_FOUND, "unknown or already claimed subscription").into_response(),
        },
        None => match q.filter() {
            Ok(f) => {
                let id = core.subscribe(f);
                (id, core.claim(id).expect("fresh"))
            }
            Err(e) => return (StatusCode::BAD_REQUEST, e).into_response(),
        },
    };
    Sse::new(event_stream(core, id, rx)).keep_alive(KeepAlive::default()).into_response()
}

struct Unsubscribe(Arc<NodeCore>, u64);

impl Drop for Unsubscribe {
    fn drop(&mut self) {
        self.0.unsubscribe(self.1);
    }
}

fn event_stream(
    core: Arc<NodeCore>,
    id: u64,
    rx: tmpsc::UnboundedReceiver<EventEnvelope>,
) -> impl Stream<Item = Result<axum::response::sse::Event, Infallible>> {
    let guard = Unsubscribe(core, id);
    tokio_stream::wrappers::UnboundedReceiverStream::new(rx).map(move |env| {
        let _ = &guard;
        Ok(axum::response::sse::Event::default()
            .event(env.event.kind())
            .id(env.block_height.to_string())
            .data(serde_json::to_string(&env).expect("serializes")))
    })
}

/// A running node bound to a socket.
pub struct NodeHandle {
    pub addr: SocketAddr,
    pub core: Arc<NodeCore>,
    shutdown: Option<oneshot::Sender<()>>,
    runtime: Option<thread::JoinHandle<()>>,
}

impl NodeHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) {
        self.shutdown_inner();
    }

    fn shutdown_inner(&mut self) {
        if let Some(s) = self.shutdown.take() {
            let _ = s.send(());
        }
        if let Some(h) = self.runtime.take() {
            let _ = h.join();
        }
    }
}

impl Drop for NodeHandle {
    fn drop(&mut self) {
        self.shutdown_inner();
    }
}

/// Starts a node on its own runtime thread and returns once it is listening.
pub fn spawn(config: &NodeConfig) -> Result<NodeHandle, NodeError> {
    let genesis = load_genesis(config)?;
    spawn_with(genesis, config)
}

pub fn spawn_with(genesis: GenesisConfig, config: &NodeConfig) -> Result<NodeHandle, NodeError> {
    let core = NodeCore::start(genesis, config.clock, config.log.as_deref())?;
    let listener = std::net::TcpListener::bind(config.listen)
        .map_err(|source| NodeError::Bind { addr: config.listen, source })?;
    listener.set_nonblocking(true).map_err(|source| NodeError::Bind { addr: config.listen, source })?;
    let addr = listener.local_addr().map_err(|source| NodeError::Bind { addr: config.listen, source })?;
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let app = router(core.clone());
    let runtime = thread::Builder::new()
        .name("anka-node".into())
        .spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("tokio runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = stop_rx.await;
                    })
                    .await;
            });
            // Open SSE streams would otherwise keep the runtime alive.
            rt.shutdown_background();
        })
        .expect("spawn node runtime");
    Ok(NodeHandle { addr, core, shutdown: Some(stop_tx), runtime: Some(runtime) })
}

/// Runs a node in the foreground until ctrl-c.
pub async fn serve(config: &NodeConfig) -> Result<(), NodeError> {
    let genesis = load_genesis(config)?;
    let core = NodeCore::start(genesis, config.clock, config.log.as_deref())?;
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|source| NodeError::Bind { addr: config.listen, source })?;
    let addr = listener.local_addr().map_err(|source| NodeError::Bind { addr: config.listen, source })?;
    eprintln!("anka node listening on http://{addr} (chain date {})", core.read(|c| c.today()));
    axum::serve(listener, router(core))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| NodeError::Bind { addr, source })
}

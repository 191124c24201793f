//! The `anka` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anka_core::chain::DEV_FAUCET_LABEL;
use anka_core::cost::{round_cents, AnnualScenario, CostParameters};
use anka_core::{
    filter_by_diameter, haversine, normalize_postal, Address, Amount, DistanceMeters, EnergyOffer, ExecStatus,
    GeoPoint, KeyPair, OfferSpec, OfferStatus, Payload, Receipt,
};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use rust_decimal::Decimal;
use serde_json::json;

use crate::bench::{self, BenchOptions};
use crate::client::{ClientError, RpcClient};
use crate::config::{CliConfig, Clock, NodeConfig, OutputFormat, ENV_KEYSTORE, ENV_NODE_URL};
use crate::keystore::{generate_keypair, Keystore};
use crate::scenario;
use crate::txlog::{self, TxLog};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REVERT: i32 = 1;
pub const EXIT_TRANSPORT: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

pub const DEFAULT_KEYSTORE: &str = "anka-wallet.json";

#[derive(Debug, Parser)]
#[command(name = "anka", version, about = "Peer-to-peer energy marketplace: node, wallet, market, bench")]
pub struct Cli {
    /// CLI config file (TOML).
    #[arg(long, global = true, env = "ANKA_CONFIG", help_heading = "Global options")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = ENV_NODE_URL, help_heading = "Global options")]
    pub node_url: Option<String>,
    #[arg(long, global = true, env = ENV_KEYSTORE, help_heading = "Global options")]
    pub keystore: Option<PathBuf>,
    #[arg(long, global = true, value_enum, help_heading = "Global options")]
    pub format: Option<OutputFormat>,
    /// Print the signed transaction hex instead of submitting it.
    #[arg(long, global = true, help_heading = "Global options")]
    pub dry_run: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a node.
    Node(NodeArgs),
    /// Keystores and balances.
    #[command(subcommand)]
    Wallet(WalletCmd),
    /// Marketplace transactions and queries.
    #[command(subcommand)]
    Market(MarketCmd),
    /// Fee table, query-cost comparison and yearly projection.
    Bench(BenchArgs),
    /// Scripted runs, workload generation and log replay.
    #[command(subcommand)]
    Scenario(ScenarioCmd),
}

#[derive(Debug, Args)]
pub struct NodeArgs {
    /// Node config file (TOML).
    #[arg(long)]
    pub node_config: Option<PathBuf>,
    #[arg(long)]
    pub listen: Option<std::net::SocketAddr>,
    #[arg(long)]
    pub genesis: Option<PathBuf>,
    /// Append every submission to this JSON-lines file.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Start a fixed clock at this date.
    #[arg(long, conflicts_with = "system_clock")]
    pub date: Option<NaiveDate>,
    /// Follow the host's UTC date instead of a fixed clock.
    #[arg(long)]
    pub system_clock: bool,
}

#[derive(Debug, Subcommand)]
pub enum WalletCmd {
    /// Create a keystore and print its address.
    New {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Deterministic key from a seed. Tests only.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Address, balance and nonce.
    Show {
        #[arg(long)]
        address: Option<Address>,
    },
    /// Send tokens from the dev faucet. Only works on dev chains.
    Fund {
        #[arg(long)]
        to: Option<Address>,
        #[arg(long)]
        amount: Amount,
    },
}

#[derive(Debug, Subcommand)]
pub enum MarketCmd {
    /// Deploy the marketplace contract.
    Deploy,
    /// Create a profile for the keystore's address.
    Register {
        #[arg(long)]
        name: String,
    },
    /// List an energy offer.
    List {
        /// Energy in watt-hours.
        #[arg(long)]
        wh: u64,
        #[arg(long)]
        voltage: u32,
        /// Price in gwei.
        #[arg(long)]
        price: Amount,
        #[arg(long)]
        postal: String,
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        #[arg(long)]
        date: Option<NaiveDate>,
    },
    /// Offers for a date and postal code, optionally near a point.
    Browse {
        #[arg(long)]
        postal: Option<String>,
        #[arg(long)]
        date: Option<NaiveDate>,
        #[arg(long)]
        voltage: Option<u32>,
        /// `lat,lon` of the buyer.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        near: Option<GeoPoint>,
        #[arg(long, requires = "near")]
        diameter_km: Option<f64>,
    },
    /// Buy an offer at its listed price.
    Buy {
        #[arg(long)]
        id: u64,
    },
    /// Withdraw one of your own active offers.
    Cancel {
        #[arg(long)]
        id: u64,
    },
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Market sizes for the query comparison.
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
    pub offers: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub postal_codes: usize,
    /// Offers in the queried bucket.
    #[arg(long, default_value_t = 5)]
    pub bucket: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Write the query comparison as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub usd_per_gwei: Option<Decimal>,
    #[arg(long, default_value_t = 1)]
    pub gas_price: Amount,
    #[arg(long, default_value_t = 100)]
    pub listings: u64,
    #[arg(long, default_value_t = 50)]
    pub sales: u64,
    #[arg(long, default_value = "20")]
    pub avg_price: Decimal,
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCmd {
    /// Run a JSON-lines scenario on a fresh dev chain.
    Run {
        file: PathBuf,
        /// Record the run as a transaction log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Emit a seeded mixed workload.
    Generate {
        #[arg(long, default_value_t = 1000)]
        transactions: usize,
        #[arg(long, default_value_t = 8)]
        actors: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute a transaction log and check every recorded outcome.
    Replay {
        log: PathBuf,
        /// Genesis TOML, when the log has no header.
        #[arg(long)]
        genesis: Option<PathBuf>,
    },
}

fn parse_point(s: &str) -> Result<GeoPoint, String> {
    let (lat, lon) = s.split_once(',').ok_or("expected lat,lon")?;
    let lat: f64 = lat.trim().parse().map_err(|e| format!("latitude: {e}"))?;
    let lon: f64 = lon.trim().parse().map_err(|e| format!("longitude: {e}"))?;
    GeoPoint::from_degrees(lat, lon).map_err(|e| e.to_string())
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Transport(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Transport(_) => EXIT_TRANSPORT,
            CliError::Failed(_) => EXIT_REVERT,
        }
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Transport(_) => CliError::Transport(e.to_string()),
            ClientError::Rejected(r) => CliError::Failed(format!("rejected: {r}")),
            ClientError::Rpc(r) => CliError::Failed(r.to_string()),
            ClientError::Decode(_) => CliError::Transport(e.to_string()),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

struct Ctx<'a> {
    config: CliConfig,
    dry_run: bool,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn json(&self) -> bool {
        self.config.format == OutputFormat::Json
    }

    fn client(&self) -> RpcClient {
        RpcClient::new(&self.config.node_url)
    }

    fn keystore_path(&self) -> PathBuf {
        self.config.keystore.clone().unwrap_or_else(|| DEFAULT_KEYSTORE.into())
    }

    fn keys(&self) -> Result<KeyPair, CliError> {
        let path = self.keystore_path();
        if !path.exists() {
            return Err(usage(format!("no keystore at {} (create one with `anka wallet new`)", path.display())));
        }
        Keystore::load_keypair(&path).map_err(usage)
    }

    fn print(&mut self, text: impl AsRef<str>) -> Result<(), CliError> {
        writeln!(self.out, "{}", text.as_ref()).map_err(|e| CliError::Transport(format!("stdout: {e}")))
    }

    fn print_json(&mut self, v: &serde_json::Value) -> Result<(), CliError> {
        self.print(serde_json::to_string_pretty(v).expect("serializes"))
    }

    /// Signs `payload` and submits it, or prints it under `--dry-run`.
    fn transact(&mut self, keys: &KeyPair, payload: Payload) -> Result<Option<Receipt>, CliError> {
        let client = self.client();
        let stx = client.prepare(keys, payload)?;
        if self.dry_run {
            if self.json() {
                self.print_json(&json!({"tx": stx.to_hex(), "tx_hash": stx.hash()}))?;
            } else {
                self.print(stx.to_hex())?;
            }
            return Ok(None);
        }
        let receipt = client.send_transaction(&stx)?;
        let params = CostParameters::default();
        let fee_gwei = receipt.gas_used as Amount * stx.tx.gas_price;
        let fee_usd = round_cents(params.gwei_to_usd(fee_gwei));
        if self.json() {
            self.print_json(&json!({
                "receipt": receipt,
                "fee_gwei": fee_gwei.to_string(),
                "fee_usd": fee_usd.to_string(),
            }))?;
        } else {
            let status = match receipt.status {
                ExecStatus::Success => "Success".to_string(),
                ExecStatus::Reverted(r) => format!("Reverted ({r})"),
            };
            self.print(format!(
                "status:  {status}\ntx:      {}\nblock:   {}\ngas:     {}\nfee:     {fee_gwei} gwei (${fee_usd:.2})",
                receipt.tx_hash, receipt.block_height, receipt.gas_used
            ))?;
        }
        match receipt.status {
            ExecStatus::Success => Ok(Some(receipt)),
            ExecStatus::Reverted(r) => Err(CliError::Failed(format!("reverted: {r}"))),
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code()
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = CliConfig::load(cli.config.as_deref()).map_err(usage)?;
    if let Some(u) = cli.node_url {
        config.node_url = u;
    }
    if let Some(k) = cli.keystore {
        config.keystore = Some(k);
    }
    if let Some(f) = cli.format {
        config.format = f;
    }
    let mut ctx = Ctx { config, dry_run: cli.dry_run, out };
    match cli.command {
        Command::Node(a) => node(a),
        Command::Wallet(c) => wallet(&mut ctx, c),
        Command::Market(c) => market(&mut ctx, c),
        Command::Bench(a) => bench_cmd(&mut ctx, a),
        Command::Scenario(c) => scenario_cmd(&mut ctx, c),
    }
}

fn node(a: NodeArgs) -> Result<(), CliError> {
    let mut config = NodeConfig::load(a.node_config.as_deref()).map_err(usage)?;
    if let Some(l) = a.listen {
        config.listen = l;
    }
    if let Some(g) = a.genesis {
        config.genesis = Some(g);
    }
    if let Some(l) = a.log {
        config.log = Some(l);
    }
    if a.system_clock {
        config.clock = Clock::System;
    } else if let Some(d) = a.date {
        config.clock = Clock::Fixed(Some(d));
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Transport(e.to_string()))?;
    rt.block_on(crate::node::serve(&config)).map_err(|e| match e {
        crate::node::NodeError::Bind { .. } => CliError::Transport(e.to_string()),
        other => usage(other),
    })
}

fn wallet(ctx: &mut Ctx, cmd: WalletCmd) -> Result<(), CliError> {
    match cmd {
        WalletCmd::New { out, seed, force } => {
            let path = out.unwrap_or_else(|| ctx.keystore_path());
            let keys = generate_keypair(seed);
            Keystore::from_keypair(&keys).save(&path, force).map_err(usage)?;
            if ctx.json() {
                ctx.print_json(&json!({"address": keys.address(), "keystore": path}))
            } else {
                ctx.print(keys.address().to_string())
            }
        }
        WalletCmd::Show { address } => {
            let address = match address {
                Some(a) => a,
                None => ctx.keys()?.address(),
            };
            let client = ctx.client();
            let account = client.account(&address)?;
            let profile = client.profile(&address)?;
            if ctx.json() {
                ctx.print_json(&json!({
                    "address": address,
                    "balance": account.balance.to_string(),
                    "nonce": account.nonce,
                    "name": profile.map(|p| p.display_name),
                }))
            } else {
                let mut s = format!("address: {address}\nbalance: {}\nnonce:   {}", account.balance, account.nonce);
                if let Some(p) = profile {
                    s += &format!("\nname:    {}", p.display_name);
                }
                ctx.print(s)
            }
        }
        WalletCmd::Fund { to, amount } => {
            let to = match to {
                Some(a) => a,
                None => ctx.keys()?.address(),
            };
            let faucet = KeyPair::from_label(DEV_FAUCET_LABEL);
            ctx.transact(&faucet, Payload::Transfer { to, amount }).map(drop)
        }
    }
}

fn offer_rows(offers: &[(EnergyOffer, Option<f64>)]) -> String {
    let mut s = format!(
        "{:>6}  {:<42}  {:>8}  {:>7}  {:>14}  {:<10}  {:<10}  {:>10}",
        "id", "seller", "wh", "voltage", "price", "postal", "date", "km"
    );
    for (o, km) in offers {
        s += &format!(
            "\n{:>6}  {:<42}  {:>8}  {:>7}  {:>14}  {:<10}  {:<10}  {:>10}",
            o.id,
            o.seller.to_string(),
            o.energy_wh,
            o.voltage.to_string(),
            o.price,
            o.postal_code.as_str(),
            o.offer_date.to_string(),
            km.map_or("-".to_string(), |k| format!("{k:.3}"))
        );
    }
    s
}

fn market(ctx: &mut Ctx, cmd: MarketCmd) -> Result<(), CliError> {
    match cmd {
        MarketCmd::Deploy => {
            let keys = ctx.keys()?;
            ctx.transact(&keys, Payload::Deploy).map(drop)
        }
        MarketCmd::Register { name } => {
            let keys = ctx.keys()?;
            ctx.transact(&keys, Payload::Register { name }).map(drop)
        }
        MarketCmd::List { wh, voltage, price, postal, lat, lon, date } => {
            let keys = ctx.keys()?;
            let location = GeoPoint::from_degrees(lat, lon).map_err(usage)?;
            let offer_date = match date.or(ctx.config.date) {
                Some(d) => d,
                None => ctx.client().chain_info()?.today,
            };
            let spec = OfferSpec { energy_wh: wh, voltage, price, postal_code: postal, location, offer_date };
            let Some(receipt) = ctx.transact(&keys, Payload::ListOffer(spec))? else { return Ok(()) };
            if !ctx.json() {
                if let Some(anka_core::Event::OfferListed { offer }) = receipt.events.first() {
                    ctx.print(format!("offer id: {}", offer.id))?;
                }
            }
            Ok(())
        }
        MarketCmd::Browse { postal, date, voltage, near, diameter_km } => {
            let raw = postal
                .or(ctx.config.postal.clone())
                .ok_or_else(|| usage("browse needs --postal (or a default postal in the config)"))?;
            let code = normalize_postal(&raw).map_err(|e| usage(format!("{raw}: {e}")))?;
            let result = ctx.client().offers(date.or(ctx.config.date), &code, voltage)?;
            let mut rows: Vec<(EnergyOffer, Option<f64>)> = match near {
                Some(at) => {
                    let kept = match diameter_km {
                        Some(km) => {
                            let d = DistanceMeters::from_km(km).map_err(usage)?;
                            filter_by_diameter(at, d, &result.offers).into_iter().cloned().collect()
                        }
                        None => result.offers,
                    };
                    let mut rows: Vec<_> =
                        kept.into_iter().map(|o| { let km = haversine(o.location, at).km(); (o, Some(km)) }).collect();
                    rows.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite").then(a.0.id.cmp(&b.0.id)));
                    rows
                }
                None => result.offers.into_iter().map(|o| (o, None)).collect(),
            };
            rows.retain(|(o, _)| o.status == OfferStatus::Active);
            if ctx.json() {
                let offers: Vec<_> = rows
                    .iter()
                    .map(|(o, km)| {
                        let mut v = serde_json::to_value(o).expect("serializes");
                        v["distance_km"] = json!(km);
                        v
                    })
                    .collect();
                ctx.print_json(&json!({"date": result.date, "postal_code": code, "gas_used": result.gas_used, "offers": offers}))
            } else {
                ctx.print(offer_rows(&rows))
            }
        }
        MarketCmd::Buy { id } => {
            let keys = ctx.keys()?;
            ctx.transact(&keys, Payload::BuyOffer { offer_id: id }).map(drop)
        }
        MarketCmd::Cancel { id } => {
            let keys = ctx.keys()?;
            ctx.transact(&keys, Payload::CancelOffer { offer_id: id }).map(drop)
        }
    }
}

fn bench_cmd(ctx: &mut Ctx, a: BenchArgs) -> Result<(), CliError> {
    let params = CostParameters::new(a.usd_per_gwei.unwrap_or(anka_core::cost::DEFAULT_USD_PER_GWEI), a.gas_price)
        .map_err(usage)?;
    if a.postal_codes < 2 {
        return Err(usage("--postal-codes must be at least 2"));
    }
    let opts = BenchOptions {
        offers: a.offers,
        postal_codes: a.postal_codes,
        bucket: a.bucket,
        seed: a.seed,
        params,
        annual: AnnualScenario { listings_per_year: a.listings, sales_per_year: a.sales, avg_price_usd: a.avg_price },
    };
    if opts.annual.avg_price_usd.is_sign_negative() {
        return Err(usage("--avg-price must be non-negative"));
    }
    let report = bench::run(&opts).map_err(|e| CliError::Failed(e.to_string()))?;
    if let Some(path) = &a.csv {
        bench::write_csv(&report.queries.rows, path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    if ctx.json() {
        ctx.print_json(&serde_json::to_value(&report).expect("serializes"))
    } else {
        ctx.print(bench::render_text(&report).trim_end())
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn scenario_cmd(ctx: &mut Ctx, cmd: ScenarioCmd) -> Result<(), CliError> {
    match cmd {
        ScenarioCmd::Run { file, log } => {
            let steps = scenario::parse(&read_file(&file)?).map_err(usage)?;
            let run = scenario::run(&steps).map_err(|e| CliError::Failed(e.to_string()))?;
            if let Some(p) = log {
                run.log.save(&p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            }
            let summary = run.summary(&steps);
            if ctx.json() {
                ctx.print_json(&serde_json::to_value(&summary).expect("serializes"))
            } else {
                let mut s = format!(
                    "steps:        {}\ntransactions: {}\nheight:       {}\nstate_hash:   {}",
                    summary.steps, summary.transactions, summary.height, summary.state_hash
                );
                for b in &summary.balances {
                    s += &format!("\n{:<16} {}  {:>28}  nonce {}", b.actor, b.address, b.balance, b.nonce);
                }
                ctx.print(s)
            }
        }
        ScenarioCmd::Generate { transactions, actors, seed, out } => {
            let text = scenario::render(&scenario::generate(transactions, actors, seed));
            match out {
                Some(p) => std::fs::write(&p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
                None => write!(ctx.out, "{text}").map_err(|e| CliError::Transport(e.to_string())),
            }
        }
        ScenarioCmd::Replay { log, genesis } => {
            let parsed = TxLog::load(&log).map_err(|e| usage(format!("{}: {e}", log.display())))?;
            let genesis = genesis.map(|p| crate::genesis::load(&p)).transpose().map_err(usage)?;
            let v = txlog::verify(&parsed, genesis.as_ref()).map_err(|e| CliError::Failed(e.to_string()))?;
            if ctx.json() {
                ctx.print_json(&json!({
                    "entries": v.outcomes.len(),
                    "height": v.chain.height(),
                    "state_hash": v.state_hash,
                }))
            } else {
                ctx.print(format!(
                    "entries:    {}\nheight:     {}\nstate_hash: {}",
                    v.outcomes.len(),
                    v.chain.height(),
                    v.state_hash
                ))
            }
        }
    }
}

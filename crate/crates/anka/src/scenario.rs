//! Scripted scenarios: JSON lines of actor commands run on a dev chain.
//!
//! ```text
//! {"action":"deploy","actor":"operator"}
//! {"action":"fund","actor":"alice","amount":"1000000000000"}
//! {"action":"register","actor":"alice","name":"Alice"}
//! {"action":"list","actor":"alice","energy_wh":500,"voltage":24,"price":"1000000","postal_code":"34450","lat":41.205,"lon":29.073}
//! {"action":"buy","actor":"bob","offer_id":0}
//! {"action":"advance_day"}
//! {"action":"buy","actor":"carol","offer_id":0,"expect":"reverted","reason":"OfferNotActive"}
//! ```
//!
//! Actor keys derive from their names, so the same file always produces the
//! same signed transactions. `fund` transfers from the dev faucet.

use std::collections::BTreeMap;

use anka_core::chain::{GenesisConfig, DEV_FAUCET_LABEL};
use anka_core::{
    Address, Amount, Chain, Digest, ExecStatus, GeoPoint, KeyPair, OfferSpec, Outcome, Payload, Transaction,
};
use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::txlog::{LogRecord, TxLog};

/// Genesis date of every scenario chain.
pub const SCENARIO_DATE: NaiveDate = match NaiveDate::from_ymd_opt(2026, 1, 1) {
    Some(d) => d,
    None => panic!(),
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Deploy,
    Fund {
        #[serde(with = "anka_core::serde_amount")]
        amount: Amount,
    },
    Register {
        name: String,
    },
    List {
        energy_wh: u64,
        voltage: u32,
        #[serde(with = "anka_core::serde_amount")]
        price: Amount,
        postal_code: String,
        lat: f64,
        lon: f64,
        /// Days after the current chain date.
        #[serde(default, skip_serializing_if = "is_zero")]
        days_ahead: u32,
    },
    Buy {
        offer_id: u64,
    },
    Cancel {
        offer_id: u64,
    },
    Transfer {
        to: String,
        #[serde(with = "anka_core::serde_amount")]
        amount: Amount,
    },
    AdvanceDay {
        #[serde(default = "one")]
        days: u32,
    },
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    #[default]
    Success,
    Reverted,
    Rejected,
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    #[serde(flatten)]
    pub action: Action,
    #[serde(default)]
    pub expect: Expect,
    /// Revert or rejection name the step must produce.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_limit: Option<u64>,
}

impl Step {
    fn new(actor: &str, action: Action) -> Self {
        Step { actor: Some(actor.to_string()), action, expect: Expect::Success, reason: None, gas_limit: None }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("step {step}: {message}")]
pub struct ScenarioError {
    /// Zero-based index of the failing step.
    pub step: usize,
    pub message: String,
}

pub fn parse(text: &str) -> Result<Vec<Step>, ScenarioError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with("//"))
        .enumerate()
        .map(|(step, (_, line))| {
            serde_json::from_str(line).map_err(|e| ScenarioError { step, message: format!("invalid step: {e}") })
        })
        .collect()
}

pub fn render(steps: &[Step]) -> String {
    steps.iter().map(|s| serde_json::to_string(s).expect("serializes") + "\n").collect()
}

pub fn actor_keys(name: &str) -> KeyPair {
    KeyPair::from_label(name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorBalance {
    pub actor: String,
    pub address: Address,
    #[serde(with = "anka_core::serde_amount")]
    pub balance: Amount,
    pub nonce: u64,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub chain: Chain,
    pub genesis: GenesisConfig,
    pub log: TxLog,
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub steps: usize,
    pub transactions: usize,
    pub height: u64,
    pub state_hash: Digest,
    pub balances: Vec<ActorBalance>,
}

impl ScenarioRun {
    pub fn summary(&self, steps: &[Step]) -> Summary {
        let mut actors: Vec<&str> = Vec::new();
        for s in steps {
            let names = s.actor.as_deref().into_iter().chain(match &s.action {
                Action::Transfer { to, .. } => Some(to.as_str()),
                _ => None,
            });
            for n in names {
                if !actors.contains(&n) {
                    actors.push(n);
                }
            }
        }
        let balances = actors
            .into_iter()
            .map(|name| {
                let address = actor_keys(name).address();
                let a = self.chain.account(&address);
                ActorBalance { actor: name.to_string(), address, balance: a.balance, nonce: a.nonce }
            })
            .collect();
        Summary {
            steps: steps.len(),
            transactions: self.outcomes.len(),
            height: self.chain.height(),
            state_hash: self.chain.state_hash(),
            balances,
        }
    }
}

/// Runner state shared by [`run`] and the generator.
struct Runner {
    chain: Chain,
    genesis: GenesisConfig,
    nonces: BTreeMap<Address, u64>,
    log: TxLog,
    outcomes: Vec<Outcome>,
}

impl Runner {
    fn new(date: NaiveDate) -> Self {
        let genesis = GenesisConfig::dev(date);
        let chain = Chain::genesis(&genesis).expect("dev genesis is valid");
        Runner { chain, log: TxLog { genesis: Some(genesis.clone()), records: vec![] }, genesis, nonces: BTreeMap::new(), outcomes: vec![] }
    }

    /// Executes one step; `Ok(None)` for steps that are not transactions.
    fn step(&mut self, step: &Step) -> Result<Option<Outcome>, String> {
        let (signer, payload) = match &step.action {
            Action::AdvanceDay { days } => {
                let d = self.chain.today() + Days::new((*days).into());
                self.chain.set_date(d).map_err(|e| e.to_string())?;
                return Ok(None);
            }
            Action::Fund { amount } => {
                let to = actor_keys(step.actor.as_deref().ok_or("fund needs an actor")?).address();
                (DEV_FAUCET_LABEL.to_string(), Payload::Transfer { to, amount: *amount })
            }
            other => {
                let actor = step.actor.clone().ok_or("step needs an actor")?;
                let payload = match other {
                    Action::Deploy => Payload::Deploy,
                    Action::Register { name } => Payload::Register { name: name.clone() },
                    Action::List { energy_wh, voltage, price, postal_code, lat, lon, days_ahead } => {
                        Payload::ListOffer(OfferSpec {
                            energy_wh: *energy_wh,
                            voltage: *voltage,
                            price: *price,
                            postal_code: postal_code.clone(),
                            location: GeoPoint::from_degrees(*lat, *lon).map_err(|e| e.to_string())?,
                            offer_date: self.chain.today() + Days::new((*days_ahead).into()),
                        })
                    }
                    Action::Buy { offer_id } => Payload::BuyOffer { offer_id: *offer_id },
                    Action::Cancel { offer_id } => Payload::CancelOffer { offer_id: *offer_id },
                    Action::Transfer { to, amount } => Payload::Transfer { to: actor_keys(to).address(), amount: *amount },
                    Action::Fund { .. } | Action::AdvanceDay { .. } => unreachable!(),
                };
                (actor, payload)
            }
        };
        let keys = actor_keys(&signer);
        let nonce = self.nonces.get(&keys.address()).copied().unwrap_or(0);
        let gas_limit = step.gas_limit.unwrap_or_else(|| self.chain.schedule().success_gas(&payload));
        let stx = Transaction::new(&keys, nonce, gas_limit, 1, payload).sign(&keys);
        let outcome = self.chain.submit(&stx);
        if outcome.is_ok() {
            self.nonces.insert(keys.address(), nonce + 1);
        }
        self.log.records.push(LogRecord::new(self.chain.today(), &stx, Some(&outcome)));
        self.outcomes.push(outcome.clone());
        Ok(Some(outcome))
    }

    fn finish(self) -> ScenarioRun {
        ScenarioRun { chain: self.chain, genesis: self.genesis, log: self.log, outcomes: self.outcomes }
    }
}

fn describe(outcome: &Outcome) -> (Expect, String) {
    match outcome {
        Ok(r) => match r.status {
            ExecStatus::Success => (Expect::Success, "Success".into()),
            ExecStatus::Reverted(reason) => (Expect::Reverted, reason.to_string()),
        },
        Err(rej) => (Expect::Rejected, rej.name().into()),
    }
}

fn check(step: &Step, outcome: &Outcome) -> Result<(), String> {
    let (got, name) = describe(outcome);
    if step.expect != Expect::Any && step.expect != got {
        return Err(format!("expected {:?}, got {:?} ({name})", step.expect, got).to_lowercase());
    }
    match &step.reason {
        Some(r) if *r != name => Err(format!("expected {r}, got {name}")),
        _ => Ok(()),
    }
}

/// Runs `steps` on a fresh dev chain dated [`SCENARIO_DATE`], stopping at the
/// first step whose outcome differs from its expectation.
pub fn run(steps: &[Step]) -> Result<ScenarioRun, ScenarioError> {
    let mut runner = Runner::new(SCENARIO_DATE);
    for (i, step) in steps.iter().enumerate() {
        let err = |message| ScenarioError { step: i, message };
        if let Some(outcome) = runner.step(step).map_err(err)? {
            check(step, &outcome).map_err(err)?;
        }
    }
    Ok(runner.finish())
}

const POSTALS: [&str; 6] = ["34450", "06800", "35220", "16110", "07070", "01330"];
const CENTERS: [(f64, f64); 6] =
    [(41.205, 29.073), (39.8917, 32.7844), (38.4355, 27.1427), (40.2169, 28.9834), (36.8862, 30.7041), (37.0578, 35.3512)];

fn micro(deg: f64) -> f64 {
    (deg * 1e6).round() / 1e6
}

/// A seeded mixed workload with `transactions` transaction steps. Every
/// step's expectation is the outcome it actually has, so the file doubles
/// as a regression record.
pub fn generate(transactions: usize, actors: usize, seed: u64) -> Vec<Step> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut runner = Runner::new(SCENARIO_DATE);
    let traders: Vec<String> = (0..actors.max(2)).map(|i| format!("trader-{i}")).collect();
    let mut steps = Vec::new();
    let push = |runner: &mut Runner, mut step: Step, steps: &mut Vec<Step>| {
        let outcome = runner.step(&step).expect("generated steps are well-formed");
        if let Some(o) = outcome {
            let (expect, name) = describe(&o);
            step.expect = expect;
            if expect != Expect::Success {
                step.reason = Some(name);
            }
        }
        steps.push(step);
    };

    let mut setup = vec![
        Step::new("operator", Action::Fund { amount: 10 * anka_core::BASE_UNITS_PER_TOKEN }),
        Step::new("operator", Action::Deploy),
    ];
    for t in &traders {
        setup.push(Step::new(t, Action::Fund { amount: 50 * anka_core::BASE_UNITS_PER_TOKEN }));
        setup.push(Step::new(t, Action::Register { name: t.replace('-', " ") }));
    }
    for s in setup.into_iter().take(transactions) {
        push(&mut runner, s, &mut steps);
    }

    let voltages = runner.chain.market().config().voltages.clone();
    let mut sent = runner.outcomes.len();
    while sent < transactions {
        let actor = traders[rng.gen_range(0..traders.len())].clone();
        let offers = runner.chain.market().offers().len() as u64;
        let roll = rng.gen_range(0..100);
        if roll < 2 {
            push(&mut runner, Step { actor: None, ..Step::new("", Action::AdvanceDay { days: 1 }) }, &mut steps);
            continue;
        }
        let action = match roll {
            _ if offers == 0 || roll < 45 => {
                let p = rng.gen_range(0..POSTALS.len());
                let (lat, lon) = CENTERS[p];
                Action::List {
                    energy_wh: rng.gen_range(100..5_000),
                    // Now and then an unsupported voltage, to exercise reverts.
                    voltage: if rng.gen_ratio(1, 25) { 7 } else { voltages[rng.gen_range(0..voltages.len())] },
                    price: rng.gen_range(1_000..10_000_000),
                    postal_code: POSTALS[p].to_string(),
                    lat: micro(lat + rng.gen_range(-0.05..0.05)),
                    lon: micro(lon + rng.gen_range(-0.05..0.05)),
                    days_ahead: rng.gen_range(0..2),
                }
            }
            45..=79 => Action::Buy { offer_id: rng.gen_range(0..offers) },
            80..=91 => Action::Cancel { offer_id: rng.gen_range(0..offers) },
            _ => Action::Transfer {
                to: traders[rng.gen_range(0..traders.len())].clone(),
                amount: rng.gen_range(1..1_000_000),
            },
        };
        push(&mut runner, Step::new(&actor, action), &mut steps);
        sent += 1;
    }
    steps
}

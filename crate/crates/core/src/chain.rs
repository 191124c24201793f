//! The simulated ledger.
//!
//! One transaction per block, applied by a single sequencer. Balances only
//! move between accounts and the fee sink, so their sum never changes
//! after genesis.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::address::Address;
use crate::codec::Encoder;
use crate::digest::Digest;
use crate::gas::{GasMeter, GasSchedule, InvalidSchedule};
use crate::keys::KeyPair;
use crate::market::{Effects, Event, ExecContext, Market, MarketConfig, RevertReason};
use crate::tx::{Payload, SignedTransaction};
use crate::Amount;

const STATE_DOMAIN: &[u8] = b"anka/state/v1";

/// Label of the dev faucet key; see [`GenesisConfig::dev`].
pub const DEV_FAUCET_LABEL: &str = "faucet";
pub const DEV_FAUCET_BALANCE: Amount = 1_000_000_000 * crate::BASE_UNITS_PER_TOKEN;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisConfig {
    pub date: NaiveDate,
    pub accounts: Vec<GenesisAccount>,
    #[serde(default)]
    pub gas: GasSchedule,
    #[serde(default)]
    pub market: MarketConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisAccount {
    pub address: Address,
    #[serde(with = "crate::serde_amount")]
    pub balance: Amount,
}

impl GenesisConfig {
    pub fn new(date: NaiveDate) -> Self {
        GenesisConfig { date, accounts: Vec::new(), gas: GasSchedule::default(), market: MarketConfig::default() }
    }

    /// Development genesis: the well-known faucet key holds the entire
    /// supply. Test networks only.
    pub fn dev(date: NaiveDate) -> Self {
        Self::new(date).fund(KeyPair::from_label(DEV_FAUCET_LABEL).address(), DEV_FAUCET_BALANCE)
    }

    pub fn fund(mut self, address: Address, balance: Amount) -> Self {
        self.accounts.push(GenesisAccount { address, balance });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenesisError {
    #[error(transparent)]
    Schedule(#[from] InvalidSchedule),
    #[error("address {0} funded twice")]
    DuplicateAccount(Address),
    #[error("total supply overflows")]
    SupplyOverflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub address: Address,
    #[serde(with = "crate::serde_amount")]
    pub balance: Amount,
    pub nonce: u64,
}

impl Account {
    fn empty(address: Address) -> Self {
        Account { address, balance: 0, nonce: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Success,
    Reverted(RevertReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_hash: Digest,
    pub status: ExecStatus,
    pub gas_used: u64,
    pub events: Vec<Event>,
    pub block_height: u64,
}

impl Receipt {
    pub fn is_success(&self) -> bool {
        self.status == ExecStatus::Success
    }
}

/// Reasons a transaction is refused before execution. Refused transactions
/// are not included in a block and cost nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "reason")]
pub enum TxRejection {
    #[error("BadSignature")]
    BadSignature,
    #[error("BadNonce: expected {expected}, got {got}")]
    BadNonce { expected: u64, got: u64 },
    #[error("InsufficientFunds: required {required}, available {available}")]
    InsufficientFunds {
        #[serde(with = "crate::serde_amount")]
        required: Amount,
        #[serde(with = "crate::serde_amount")]
        available: Amount,
    },
}

impl TxRejection {
    pub fn name(&self) -> &'static str {
        match self {
            TxRejection::BadSignature => "BadSignature",
            TxRejection::BadNonce { .. } => "BadNonce",
            TxRejection::InsufficientFunds { .. } => "InsufficientFunds",
        }
    }
}

pub type Outcome = Result<Receipt, TxRejection>;

/// One step of recorded history: the sequencer's date when the transaction
/// arrived, and the transaction itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub date: NaiveDate,
    pub tx: SignedTransaction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("chain date cannot move backwards from {current} to {requested}")]
pub struct DateRegression {
    pub current: NaiveDate,
    pub requested: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    schedule: GasSchedule,
    accounts: BTreeMap<Address, Account>,
    market: Market,
    height: u64,
    today: NaiveDate,
    fee_sink: Amount,
    supply: Amount,
}

impl Chain {
    pub fn genesis(config: &GenesisConfig) -> Result<Self, GenesisError> {
        config.gas.validate()?;
        let mut accounts = BTreeMap::new();
        let mut supply: Amount = 0;
        for acct in &config.accounts {
            if accounts.contains_key(&acct.address) {
                return Err(GenesisError::DuplicateAccount(acct.address));
            }
            supply = supply.checked_add(acct.balance).ok_or(GenesisError::SupplyOverflow)?;
            accounts.insert(acct.address, Account { address: acct.address, balance: acct.balance, nonce: 0 });
        }
        Ok(Chain {
            schedule: config.gas,
            accounts,
            market: Market::new(config.market.clone()),
            height: 0,
            today: config.date,
            fee_sink: 0,
            supply,
        })
    }

    pub fn schedule(&self) -> &GasSchedule {
        &self.schedule
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn today(&self) -> NaiveDate {
        self.today
    }

    pub fn fee_sink(&self) -> Amount {
        self.fee_sink
    }

    /// Total issued at genesis. Always equals balances plus the fee sink.
    pub fn supply(&self) -> Amount {
        self.supply
    }

    pub fn account(&self, address: &Address) -> Account {
        self.accounts.get(address).copied().unwrap_or(Account::empty(*address))
    }

    pub fn accounts(&self) -> impl Iterator<Item = &Account> {
        self.accounts.values()
    }

    pub fn total_balances(&self) -> Amount {
        self.accounts.values().map(|a| a.balance).sum()
    }

    /// Advances the sequencer clock. Dates never move backwards.
    pub fn set_date(&mut self, date: NaiveDate) -> Result<(), DateRegression> {
        if date < self.today {
            return Err(DateRegression { current: self.today, requested: date });
        }
        self.today = date;
        Ok(())
    }

    pub fn submit(&mut self, stx: &SignedTransaction) -> Outcome {
        let tx = &stx.tx;
        if !stx.is_authentic() {
            return Err(TxRejection::BadSignature);
        }
        let sender = self.account(&tx.sender);
        if tx.nonce != sender.nonce {
            return Err(TxRejection::BadNonce { expected: sender.nonce, got: tx.nonce });
        }
        let max_fee = Amount::from(tx.gas_limit).checked_mul(tx.gas_price);
        let value = match &tx.payload {
            Payload::Transfer { amount, .. } => *amount,
            other => self.market.required_value(other),
        };
        let required = max_fee.and_then(|f| f.checked_add(value));
        if required.is_none_or(|r| r > sender.balance) {
            return Err(TxRejection::InsufficientFunds {
                required: required.unwrap_or(Amount::MAX),
                available: sender.balance,
            });
        }
        let max_fee = max_fee.expect("checked above");

        self.height += 1;
        let mut gas = GasMeter::new(tx.gas_limit);
        let result = match &tx.payload {
            Payload::Transfer { to, amount } => gas
                .charge(self.schedule.transfer)
                .map(|()| Effects { events: Vec::new(), value_transfer: Some((tx.sender, *to, *amount)) })
                .map_err(RevertReason::from),
            payload => {
                let ctx = ExecContext {
                    sender: tx.sender,
                    today: self.today,
                    spendable: sender.balance - max_fee,
                    schedule: &self.schedule,
                };
                self.market.execute(&ctx, payload, &mut gas)
            }
        };

        let (status, gas_used, events) = match result {
            Ok(effects) => {
                if let Some((from, to, amount)) = effects.value_transfer {
                    self.move_value(from, to, amount);
                }
                (ExecStatus::Success, gas.used(), effects.events)
            }
            Err(RevertReason::OutOfGas) => (ExecStatus::Reverted(RevertReason::OutOfGas), tx.gas_limit, Vec::new()),
            Err(reason) => (ExecStatus::Reverted(reason), gas.used(), Vec::new()),
        };

        let fee = Amount::from(gas_used) * tx.gas_price;
        let acct = self.accounts.entry(tx.sender).or_insert(Account::empty(tx.sender));
        acct.balance -= fee;
        acct.nonce += 1;
        self.fee_sink += fee;

        Ok(Receipt { tx_hash: stx.hash(), status, gas_used, events, block_height: self.height })
    }

    fn move_value(&mut self, from: Address, to: Address, amount: Amount) {
        self.accounts.get_mut(&from).expect("sender exists").balance -= amount;
        self.accounts.entry(to).or_insert(Account::empty(to)).balance += amount;
    }

    /// Re-executes a recorded log from genesis.
    pub fn replay(config: &GenesisConfig, log: &[LogEntry]) -> Result<(Chain, Vec<Outcome>), ReplayError> {
        let mut chain = Chain::genesis(config)?;
        let mut outcomes = Vec::with_capacity(log.len());
        for (index, entry) in log.iter().enumerate() {
            chain.set_date(entry.date).map_err(|source| ReplayError::Date { index, source })?;
            outcomes.push(chain.submit(&entry.tx));
        }
        Ok((chain, outcomes))
    }

    /// Canonical serialization of the full state.
    pub fn encode_state(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        let g = &self.schedule;
        for v in [
            g.deploy,
            g.register,
            g.list_offer,
            g.buy_offer,
            g.cancel_offer,
            g.transfer,
            g.storage_write,
            g.storage_read,
            g.iteration,
        ] {
            e.u64(v);
        }
        e.u64(self.height).i32(self.today.num_days_from_ce()).u128(self.fee_sink).u128(self.supply);
        e.u64(self.accounts.len() as u64);
        for a in self.accounts.values() {
            e.fixed(a.address.as_bytes()).u128(a.balance).u64(a.nonce);
        }
        self.market.encode_state(&mut e);
        e.into_bytes()
    }

    pub fn state_hash(&self) -> Digest {
        Digest::tagged(STATE_DOMAIN, &self.encode_state())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Genesis(#[from] GenesisError),
    #[error("log entry {index}: {source}")]
    Date { index: usize, source: DateRegression },
}

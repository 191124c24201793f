//! Step-by-step re-execution of a log, checking ledger invariants after
//! every transaction.

use std::collections::BTreeMap;

use anka_core::chain::GenesisConfig;
use anka_core::{Chain, ExecStatus, LogEntry, OfferStatus, Payload};

#[derive(Debug, Default)]
pub struct Audit {
    pub transactions: usize,
    pub rejected: usize,
    pub reverted: usize,
    pub sales: usize,
    pub violations: Vec<String>,
    pub chain: Option<Chain>,
}

pub fn audit(genesis: &GenesisConfig, entries: &[LogEntry]) -> Audit {
    let mut chain = Chain::genesis(genesis).expect("genesis");
    let mut a = Audit::default();
    let mut sold: BTreeMap<u64, usize> = BTreeMap::new();
    let supply = chain.supply();
    for (i, entry) in entries.iter().enumerate() {
        let mut fail = |m: String| a.violations.push(format!("entry {i}: {m}"));
        if chain.set_date(entry.date).is_err() {
            fail("date moved backwards".into());
        }
        let before = chain.clone();
        let tx = &entry.tx.tx;
        let sender_before = before.account(&tx.sender);
        let offer_before = match &tx.payload {
            Payload::BuyOffer { offer_id } => before.market().offer(*offer_id).cloned(),
            _ => None,
        };
        let outcome = chain.submit(&entry.tx);
        a.transactions += 1;
        if chain.total_balances() + chain.fee_sink() != supply {
            fail("balances + fee sink drifted from supply".into());
        }
        match outcome {
            Err(_) => {
                a.rejected += 1;
                if chain != before {
                    fail("rejected transaction changed state".into());
                }
            }
            Ok(r) => {
                if r.gas_used > tx.gas_limit {
                    fail(format!("gas_used {} over limit {}", r.gas_used, tx.gas_limit));
                }
                if chain.account(&tx.sender).nonce != sender_before.nonce + 1 {
                    fail("nonce did not advance by one".into());
                }
                if let ExecStatus::Reverted(_) = r.status {
                    a.reverted += 1;
                    if chain.market() != before.market() {
                        fail("revert left market changes".into());
                    }
                    let fee = r.gas_used as u128 * tx.gas_price;
                    if chain.account(&tx.sender).balance + fee != sender_before.balance {
                        fail("revert charged more than gas".into());
                    }
                }
                if let (ExecStatus::Success, Some(o)) = (r.status, &offer_before) {
                    a.sales += 1;
                    *sold.entry(o.id).or_default() += 1;
                    let gained = chain.account(&o.seller).balance - before.account(&o.seller).balance;
                    if gained != o.price {
                        fail(format!("seller of offer {} gained {gained}, price {}", o.id, o.price));
                    }
                    if chain.market().offer(o.id).unwrap().status != (OfferStatus::Sold { buyer: tx.sender }) {
                        fail(format!("offer {} not marked sold to buyer", o.id));
                    }
                    if before.market().offer(o.id).unwrap().status != OfferStatus::Active {
                        fail(format!("offer {} sold while not active", o.id));
                    }
                }
            }
        }
    }
    for (id, n) in sold {
        if n > 1 {
            a.violations.push(format!("offer {id} sold {n} times"));
        }
    }
    a.chain = Some(chain);
    a
}

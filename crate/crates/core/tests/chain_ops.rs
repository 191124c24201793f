//! Ledger admission, metering, atomicity and replay.

mod common;

use anka_core::chain::{ExecStatus, GenesisConfig, GenesisError};
use anka_core::gas::InvalidSchedule;
use anka_core::{Chain, GasSchedule, KeyPair, Payload, RevertReason, Transaction, TxRejection};
use common::*;

#[test]
fn transfer_moves_value_and_fee() {
    let mut h = Harness::new(&["alice"]);
    let bob = KeyPair::from_label("bob").address();
    let a0 = h.balance("alice");
    let r = h.ok("alice", Payload::Transfer { to: bob, amount: 100 });
    let fee = u128::from(r.gas_used);
    assert_eq!(r.gas_used, h.chain.schedule().transfer);
    assert_eq!(h.balance("alice"), a0 - 100 - fee);
    assert_eq!(h.chain.account(&bob).balance, 100);
    assert_eq!(h.chain.fee_sink(), fee);
    assert_eq!(total(&h.chain), h.chain.supply());
}

#[test]
fn exact_balance_suffices_for_transfer() {
    let mut h = Harness::with_funds(&["alice"], 100 + 21_000);
    let bob = KeyPair::from_label("bob").address();
    h.ok("alice", Payload::Transfer { to: bob, amount: 100 });
    assert_eq!(h.balance("alice"), 0);
}

#[test]
fn nonce_gap_and_replay_are_rejected_without_state_change() {
    let mut h = Harness::new(&["alice"]);
    let bob = KeyPair::from_label("bob").address();
    let kp = h.key("alice");
    let gap = Transaction::new(&kp, 1, 21_000, 1, Payload::Transfer { to: bob, amount: 1 }).sign(&kp);
    let before = h.chain.state_hash();
    assert_eq!(h.chain.submit(&gap), Err(TxRejection::BadNonce { expected: 0, got: 1 }));
    assert_eq!(h.chain.state_hash(), before);

    let first = Transaction::new(&kp, 0, 21_000, 1, Payload::Transfer { to: bob, amount: 1 }).sign(&kp);
    h.chain.submit(&first).unwrap();
    let after = h.chain.state_hash();
    assert_ne!(after, before);
    assert!(matches!(h.chain.submit(&first), Err(TxRejection::BadNonce { .. })));
    assert_eq!(h.chain.state_hash(), after);
}

#[test]
fn bad_signature_and_insufficient_funds_charge_nothing() {
    let mut h = Harness::with_funds(&["alice"], 50_000);
    let kp = h.key("alice");
    let mut forged = Transaction::new(&kp, 0, 21_000, 1, Payload::Deploy).sign(&kp);
    forged.signature.0[5] ^= 0x40;
    let before = h.chain.state_hash();
    assert_eq!(h.chain.submit(&forged), Err(TxRejection::BadSignature));
    let broke = Transaction::new(&kp, 0, 3_282_000, 1, Payload::Deploy).sign(&kp);
    assert!(matches!(h.chain.submit(&broke), Err(TxRejection::InsufficientFunds { .. })));
    let overflow = Transaction::new(&kp, 0, u64::MAX, u128::MAX, Payload::Deploy).sign(&kp);
    assert!(matches!(h.chain.submit(&overflow), Err(TxRejection::InsufficientFunds { .. })));
    assert_eq!(h.chain.state_hash(), before);
    assert_eq!(h.chain.height(), 0);
}

#[test]
fn out_of_gas_charges_full_limit_and_rolls_back() {
    let mut h = Harness::new(&["alice"]);
    h.deploy("alice");
    h.register("alice");
    let market_before = h.chain.market().clone();
    let limit = 520_000;
    let stx = h.sign_with_limit("alice", Payload::ListOffer(spec(24, 10, "34450", 41.0, 29.0, today())), limit);
    let bal = h.balance("alice");
    let r = h.submit(&stx).unwrap();
    assert_eq!(r.status, ExecStatus::Reverted(RevertReason::OutOfGas));
    assert_eq!(r.gas_used, limit);
    assert!(r.events.is_empty());
    assert_eq!(h.balance("alice"), bal - u128::from(limit));
    assert_eq!(h.chain.market(), &market_before);
    assert_eq!(h.chain.account(&h.addr("alice")).nonce, 3);
}

#[test]
fn gas_limit_below_base_is_out_of_gas() {
    let mut h = Harness::new(&["alice"]);
    let bob = KeyPair::from_label("bob").address();
    let stx = h.sign_with_limit("alice", Payload::Transfer { to: bob, amount: 5 }, 100);
    let r = h.submit(&stx).unwrap();
    assert_eq!(r.status, ExecStatus::Reverted(RevertReason::OutOfGas));
    assert_eq!(r.gas_used, 100);
    assert_eq!(h.chain.account(&bob).balance, 0);
}

#[test]
fn revert_charges_used_gas_only() {
    let mut h = Harness::new(&["alice"]);
    h.deploy("alice");
    let bal = h.balance("alice");
    let stx = h.sign_with_limit("alice", Payload::Register { name: String::new() }, 1_000_000);
    let r = h.submit(&stx).unwrap();
    assert_eq!(r.status, ExecStatus::Reverted(RevertReason::InvalidName));
    assert!(r.gas_used < 1_000_000);
    assert_eq!(r.gas_used, h.chain.schedule().register);
    assert_eq!(h.balance("alice"), bal - u128::from(r.gas_used));
}

#[test]
fn genesis_is_deterministic_and_validated() {
    let h1 = Harness::new(&["a", "b"]);
    let h2 = Harness::new(&["a", "b"]);
    assert_eq!(h1.chain.state_hash(), h2.chain.state_hash());

    let bad = GenesisConfig { gas: GasSchedule { transfer: 0, ..GasSchedule::default() }, ..GenesisConfig::new(today()) };
    assert_eq!(Chain::genesis(&bad), Err(GenesisError::Schedule(InvalidSchedule("transfer"))));

    let a = KeyPair::from_label("a").address();
    let dup = GenesisConfig::new(today()).fund(a, 1).fund(a, 2);
    assert_eq!(Chain::genesis(&dup), Err(GenesisError::DuplicateAccount(a)));
}

#[test]
fn date_only_moves_forward() {
    let mut h = Harness::new(&["a"]);
    let next = today().succ_opt().unwrap();
    h.chain.set_date(next).unwrap();
    assert!(h.chain.set_date(today()).is_err());
    assert_eq!(h.chain.today(), next);
}

#[test]
fn empty_log_replays_to_genesis() {
    let h = Harness::new(&["a"]);
    let (replayed, outcomes) = Chain::replay(&h.genesis, &[]).unwrap();
    assert!(outcomes.is_empty());
    assert_eq!(replayed.state_hash(), h.chain.state_hash());
}

#[test]
fn replay_reproduces_state_and_detects_tampering() {
    let mut h = Harness::new(&["seller", "buyer"]);
    h.deploy("seller");
    h.register("seller");
    h.register("buyer");
    h.ok("seller", Payload::ListOffer(spec(24, 1_000, "34450", 41.2, 29.0, today())));
    h.ok("buyer", Payload::BuyOffer { offer_id: 0 });
    let _ = h.exec("buyer", Payload::BuyOffer { offer_id: 0 });

    let (replayed, outcomes) = Chain::replay(&h.genesis, &h.log).unwrap();
    assert_eq!(replayed.state_hash(), h.chain.state_hash());
    assert_eq!(replayed.encode_state(), h.chain.encode_state());
    assert_eq!(outcomes.len(), h.log.len());

    let mut tampered = h.log.clone();
    let kp = h.key("seller");
    let entry = &mut tampered[3];
    let mut tx = entry.tx.tx.clone();
    if let Payload::ListOffer(s) = &mut tx.payload {
        s.price = 2_000;
    }
    entry.tx = tx.sign(&kp);
    let (other, _) = Chain::replay(&h.genesis, &tampered).unwrap();
    assert_ne!(other.state_hash(), h.chain.state_hash());
}

//! Per-operation behaviour of the marketplace contract.

mod common;

use anka_core::chain::ExecStatus;
use anka_core::cost::{CostParameters};
use anka_core::gas::{BUY_OFFER_TOTAL_GAS, LIST_OFFER_TOTAL_GAS};
use anka_core::{normalize_postal, Event, OfferStatus, Payload, RevertReason, TxRejection, VoltageClass};
use common::*;
use rust_decimal::Decimal;

fn reverted(h: &mut Harness, actor: &str, payload: Payload) -> RevertReason {
    match h.exec(actor, payload).expect("accepted").status {
        ExecStatus::Reverted(r) => r,
        ExecStatus::Success => panic!("expected revert"),
    }
}

fn market(actors: &[&str]) -> Harness {
    let mut h = Harness::new(actors);
    h.deploy(actors[0]);
    h
}

#[test]
fn register_stores_profile_and_emits_event() {
    let mut h = market(&["alice"]);
    let r = h.ok("alice", Payload::Register { name: "alice".into() });
    let a = h.addr("alice");
    assert_eq!(r.events, vec![Event::Registered { address: a, name: "alice".into() }]);
    assert_eq!(h.chain.market().profile(&a).unwrap().display_name, "alice");
}

#[test]
fn register_twice_reverts() {
    let mut h = market(&["alice"]);
    h.register("alice");
    assert_eq!(reverted(&mut h, "alice", Payload::Register { name: "alice".into() }), RevertReason::AlreadyRegistered);
}

#[test]
fn register_name_bounds() {
    let mut h = market(&["op", "bob"]);
    assert_eq!(reverted(&mut h, "bob", Payload::Register { name: String::new() }), RevertReason::InvalidName);
    assert_eq!(reverted(&mut h, "bob", Payload::Register { name: "x".repeat(65) }), RevertReason::InvalidName);
    // 64 multi-byte characters is still within bounds
    h.ok("bob", Payload::Register { name: "ş".repeat(64) });
}

#[test]
fn calls_before_deploy_revert() {
    let mut h = Harness::new(&["alice"]);
    assert_eq!(reverted(&mut h, "alice", Payload::Register { name: "alice".into() }), RevertReason::NotDeployed);
    h.deploy("alice");
    assert_eq!(reverted(&mut h, "alice", Payload::Deploy), RevertReason::AlreadyDeployed);
}

#[test]
fn first_listing_gets_id_zero_and_its_bucket() {
    let mut h = market(&["alice"]);
    h.register("alice");
    let r = h.ok("alice", Payload::ListOffer(spec(24, 1_000_000, "34450", 41.205, 29.073, today())));
    let Event::OfferListed { offer } = &r.events[0] else { panic!() };
    assert_eq!(offer.id, 0);
    assert_eq!(offer.status, OfferStatus::Active);
    assert_eq!(h.chain.market().bucket(today(), &normalize_postal("34450").unwrap()), &[0]);
    assert_eq!(r.gas_used, LIST_OFFER_TOTAL_GAS);
}

#[test]
fn listing_validation_errors() {
    let mut h = market(&["alice", "stranger"]);
    h.register("alice");
    let base = spec(24, 1_000_000, "34450", 41.205, 29.073, today());
    let cases = [
        (anka_core::OfferSpec { voltage: 7, ..base.clone() }, RevertReason::InvalidVoltage),
        (anka_core::OfferSpec { price: 0, ..base.clone() }, RevertReason::InvalidPrice),
        (anka_core::OfferSpec { energy_wh: 0, ..base.clone() }, RevertReason::InvalidEnergy),
        (anka_core::OfferSpec { postal_code: "!!".into(), ..base.clone() }, RevertReason::InvalidPostalCode),
        (anka_core::OfferSpec { offer_date: today().pred_opt().unwrap(), ..base.clone() }, RevertReason::DateInPast),
        (
            anka_core::OfferSpec { offer_date: today() + chrono::Days::new(2), ..base.clone() },
            RevertReason::DateOutOfWindow,
        ),
    ];
    for (s, want) in cases {
        assert_eq!(reverted(&mut h, "alice", Payload::ListOffer(s)), want);
    }
    assert_eq!(reverted(&mut h, "stranger", Payload::ListOffer(base.clone())), RevertReason::NotRegistered);
    // tomorrow is inside the default two-day window
    let tomorrow = anka_core::OfferSpec { offer_date: today().succ_opt().unwrap(), ..base };
    h.ok("alice", Payload::ListOffer(tomorrow));
    assert!(h.chain.market().offers().len() == 1);
}

#[test]
fn postal_codes_are_normalized_into_one_bucket() {
    let mut h = market(&["alice"]);
    h.register("alice");
    h.ok("alice", Payload::ListOffer(spec(12, 5, "sw1a 1aa", 51.5, -0.12, today())));
    h.ok("alice", Payload::ListOffer(spec(12, 5, " SW1A1AA", 51.5, -0.12, today())));
    let code = normalize_postal("SW1A1AA").unwrap();
    assert_eq!(h.chain.market().bucket(today(), &code), &[0, 1]);
}

#[test]
fn get_offers_empty_market() {
    let h = market(&["alice"]);
    let q = h.chain.market().get_offers(h.chain.schedule(), today(), &normalize_postal("34450").unwrap(), None);
    assert!(q.value.is_empty());
}

#[test]
fn voltage_filter_is_equality() {
    let mut h = market(&["alice"]);
    h.register("alice");
    for v in [9, 12, 24] {
        h.ok("alice", Payload::ListOffer(spec(v, 100, "34450", 41.2, 29.0, today())));
    }
    let code = normalize_postal("34450").unwrap();
    let q = h.chain.market().get_offers(h.chain.schedule(), today(), &code, Some(VoltageClass::new(12)));
    assert_eq!(q.value.len(), 1);
    assert_eq!(q.value[0].voltage.volts(), 12);
    let all = h.chain.market().get_offers(h.chain.schedule(), today(), &code, None);
    assert_eq!(all.value.iter().map(|o| o.id).collect::<Vec<_>>(), vec![0, 1, 2]);
    // filtering does not change what the scan costs
    assert_eq!(q.gas_used, all.gas_used);
}

#[test]
fn buy_moves_full_price_to_seller() {
    let mut h = market(&["seller", "buyer"]);
    h.register("seller");
    h.register("buyer");
    h.ok("seller", Payload::ListOffer(spec(24, 1_000_000, "34450", 41.205, 29.073, today())));
    let s0 = h.balance("seller");
    let b0 = h.balance("buyer");
    let r = h.ok("buyer", Payload::BuyOffer { offer_id: 0 });
    assert_eq!(r.gas_used, BUY_OFFER_TOTAL_GAS);
    assert_eq!(h.balance("seller"), s0 + 1_000_000);
    assert_eq!(h.balance("buyer"), b0 - 1_000_000 - u128::from(r.gas_used));
    let offer = h.chain.market().offer(0).unwrap();
    assert_eq!(offer.status, OfferStatus::Sold { buyer: h.addr("buyer") });
    let code = normalize_postal("34450").unwrap();
    assert!(h.chain.market().get_offers(h.chain.schedule(), today(), &code, None).value.is_empty());
}

#[test]
fn second_buy_is_rejected_as_not_active() {
    let mut h = market(&["seller", "b1", "b2"]);
    for a in ["seller", "b1", "b2"] {
        h.register(a);
    }
    h.ok("seller", Payload::ListOffer(spec(24, 1_000, "34450", 41.2, 29.0, today())));
    h.ok("b1", Payload::BuyOffer { offer_id: 0 });
    assert_eq!(reverted(&mut h, "b2", Payload::BuyOffer { offer_id: 0 }), RevertReason::OfferNotActive);
}

#[test]
fn buy_error_paths() {
    let mut h = market(&["seller", "buyer", "stranger"]);
    h.register("seller");
    h.register("buyer");
    h.ok("seller", Payload::ListOffer(spec(24, 1_000, "34450", 41.2, 29.0, today())));
    assert_eq!(reverted(&mut h, "stranger", Payload::BuyOffer { offer_id: 0 }), RevertReason::NotRegistered);
    assert_eq!(reverted(&mut h, "buyer", Payload::BuyOffer { offer_id: 99 }), RevertReason::UnknownOffer);
    assert_eq!(reverted(&mut h, "seller", Payload::BuyOffer { offer_id: 0 }), RevertReason::SelfPurchase);
}

#[test]
fn buy_without_funds_for_price_is_rejected_free_of_charge() {
    let mut h = market(&["seller"]);
    h.register("seller");
    h.ok("seller", Payload::ListOffer(spec(24, 1_000_000_000_000_000, "34450", 41.2, 29.0, today())));
    // the poor buyer holds just enough for registration plus one buy's gas
    let poor = anka_core::KeyPair::from_label("poor");
    h.ok("seller", Payload::Transfer { to: poor.address(), amount: 200_000 });
    h.register("poor");
    let before = h.chain.state_hash();
    let err = h.exec("poor", Payload::BuyOffer { offer_id: 0 }).unwrap_err();
    assert!(matches!(err, TxRejection::InsufficientFunds { .. }));
    assert_eq!(err.name(), "InsufficientFunds");
    assert_eq!(before, h.chain.state_hash());
}

#[test]
fn cancel_lifecycle() {
    let mut h = market(&["seller", "buyer"]);
    h.register("seller");
    h.register("buyer");
    h.ok("seller", Payload::ListOffer(spec(24, 1_000, "34450", 41.2, 29.0, today())));
    assert_eq!(reverted(&mut h, "buyer", Payload::CancelOffer { offer_id: 0 }), RevertReason::NotSeller);
    let r = h.ok("seller", Payload::CancelOffer { offer_id: 0 });
    assert!(matches!(r.events[0], Event::OfferCancelled { offer_id: 0, .. }));
    assert_eq!(h.chain.market().offer(0).unwrap().status, OfferStatus::Cancelled);
    let code = normalize_postal("34450").unwrap();
    assert!(h.chain.market().get_offers(h.chain.schedule(), today(), &code, None).value.is_empty());
    assert_eq!(reverted(&mut h, "buyer", Payload::BuyOffer { offer_id: 0 }), RevertReason::OfferNotActive);
    assert_eq!(reverted(&mut h, "seller", Payload::CancelOffer { offer_id: 0 }), RevertReason::OfferNotActive);
}

#[test]
fn calibrated_fees_convert_to_reference_usd() {
    // Division oracle: the USD figure divided by the USD price of one gwei
    // gives the gas count at gas_price = 1; rounding up to the pinned totals.
    let usd_per_gwei = Decimal::from_str_exact("0.00000164534").unwrap();
    let oracle = |usd: &str| (Decimal::from_str_exact(usd).unwrap() / usd_per_gwei).ceil();
    assert_eq!(oracle("0.88"), Decimal::from(534_844));
    assert_eq!(oracle("0.12"), Decimal::from(72_934));
    assert_eq!(oracle("5.40"), Decimal::from(3_281_997));

    let p = CostParameters::default();
    for (gas, usd) in [(LIST_OFFER_TOTAL_GAS, "0.88"), (BUY_OFFER_TOTAL_GAS, "0.12"), (3_282_000, "5.40")] {
        let fee = p.fee_usd(gas);
        assert!((fee - Decimal::from_str_exact(usd).unwrap()).abs() < Decimal::new(1, 2), "{gas}: {fee}");
    }
}

#[test]
fn onchain_area_scan_is_strict_and_charges_per_offer() {
    let mut h = market(&["alice"]);
    h.register("alice");
    h.ok("alice", Payload::ListOffer(spec(24, 1, "34450", 41.205, 29.073, today())));
    h.ok("alice", Payload::ListOffer(spec(24, 1, "06420", 39.93, 32.86, today())));
    let m = h.chain.market();
    let g = h.chain.schedule();
    let buyer = anka_core::GeoPoint::from_degrees(41.205, 29.073).unwrap();
    let zero = m.get_offers_by_diameter_onchain(g, buyer, anka_core::DistanceMeters::ZERO, today());
    assert!(zero.value.is_empty());
    assert_eq!(zero.gas_used, g.storage_read + 2 * (g.storage_read + g.iteration));
    let near = m.get_offers_by_diameter_onchain(g, buyer, anka_core::DistanceMeters::from_km(10.0).unwrap(), today());
    assert_eq!(near.value.iter().map(|o| o.id).collect::<Vec<_>>(), vec![0]);
    let far = m.get_offers_by_diameter_onchain(g, buyer, anka_core::DistanceMeters::from_km(1_000.0).unwrap(), today());
    assert_eq!(far.value.len(), 2);
}

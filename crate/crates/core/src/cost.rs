//! Fee accounting in exact decimal arithmetic.
//!
//! Gas converts to base-units at the transaction's gas price, and base-units
//! convert to USD at a fixed `usd_per_gwei`. Rounding to cents happens only
//! when a value is displayed.

use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};

use crate::chain::{Chain, ExecStatus, GenesisConfig, Receipt};
use crate::geo::GeoPoint;
use crate::keys::KeyPair;
use crate::tx::{OfferSpec, Payload, Transaction};
use crate::{Amount, BASE_UNITS_PER_TOKEN};

/// USD value of one gwei used for the reference fee table.
pub const DEFAULT_USD_PER_GWEI: Decimal = Decimal::from_parts(164_534, 0, 0, false, 11);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostParameters {
    pub usd_per_gwei: Decimal,
    #[serde(with = "crate::serde_amount")]
    pub gas_price: Amount,
}

impl Default for CostParameters {
    fn default() -> Self {
        CostParameters { usd_per_gwei: DEFAULT_USD_PER_GWEI, gas_price: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CostError {
    #[error("usd_per_gwei must be strictly positive")]
    UsdPerGwei,
    #[error("gas_price must be strictly positive")]
    GasPrice,
    #[error("reference scenario step `{0}` did not succeed")]
    Scenario(&'static str),
}

impl CostParameters {
    pub fn new(usd_per_gwei: Decimal, gas_price: Amount) -> Result<Self, CostError> {
        if usd_per_gwei <= Decimal::ZERO {
            return Err(CostError::UsdPerGwei);
        }
        if gas_price == 0 {
            return Err(CostError::GasPrice);
        }
        Ok(CostParameters { usd_per_gwei, gas_price })
    }

    pub fn fee_gwei(&self, gas_used: u64) -> Amount {
        Amount::from(gas_used) * self.gas_price
    }

    pub fn gwei_to_usd(&self, gwei: Amount) -> Decimal {
        Decimal::from(gwei) * self.usd_per_gwei
    }

    pub fn fee_usd(&self, gas_used: u64) -> Decimal {
        self.gwei_to_usd(self.fee_gwei(gas_used))
    }
}

/// Half-up rounding to cents, for display only.
pub fn round_cents(usd: Decimal) -> Decimal {
    usd.round_dp_with_strategy(2, RoundingStrategy::MidpointAwayFromZero)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostRow {
    pub operation: String,
    pub gas_used: u64,
    #[serde(with = "crate::serde_amount")]
    pub fee_gwei: Amount,
    pub fee_usd: Decimal,
}

impl CostRow {
    pub fn new(operation: &str, gas_used: u64, params: &CostParameters) -> Self {
        CostRow {
            operation: String::from(operation),
            gas_used,
            fee_gwei: params.fee_gwei(gas_used),
            fee_usd: params.fee_usd(gas_used),
        }
    }
}

/// Reference costs of a conventional hosted marketplace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CentralizedFixture {
    pub server_yearly_usd: Decimal,
    pub payment_gateway_pct: Decimal,
    pub listing_fee_usd: Decimal,
    pub selling_fee_pct: Decimal,
    pub buying_fee_usd: Decimal,
}

impl Default for CentralizedFixture {
    fn default() -> Self {
        CentralizedFixture {
            server_yearly_usd: Decimal::new(5258, 2),
            payment_gateway_pct: Decimal::new(257, 2),
            listing_fee_usd: Decimal::ZERO,
            selling_fee_pct: Decimal::new(1558, 2),
            buying_fee_usd: Decimal::ZERO,
        }
    }
}

/// Gas of the three operations that make up the fee table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationGas {
    pub deploy: u64,
    pub list_offer: u64,
    pub buy_offer: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub parameters: CostParameters,
    pub gas: OperationGas,
    pub rows: Vec<CostRow>,
    /// Base-units withheld from the seller on a sale, beyond the gas the
    /// buyer pays.
    #[serde(with = "crate::serde_amount")]
    pub seller_deduction: Amount,
    /// `seller_deduction` as a percentage of the sale price.
    pub selling_fee_pct: Decimal,
    pub centralized: CentralizedFixture,
}

impl CostReport {
    pub fn row(&self, operation: &str) -> Option<&CostRow> {
        self.rows.iter().find(|r| r.operation == operation)
    }
}

const REFERENCE_PRICE: Amount = 1_000_000;

/// Runs deploy, one listing and one purchase on a fresh chain with the
/// default schedule and reports what each metered.
pub fn measure_operation_costs(params: &CostParameters) -> Result<CostReport, CostError> {
    let today = NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date");
    let operator = KeyPair::from_label("bench-operator");
    let seller = KeyPair::from_label("bench-seller");
    let buyer = KeyPair::from_label("bench-buyer");
    let funding = 1_000 * BASE_UNITS_PER_TOKEN * params.gas_price;
    let genesis = GenesisConfig::new(today)
        .fund(operator.address(), funding)
        .fund(seller.address(), funding)
        .fund(buyer.address(), funding);
    let mut chain = Chain::genesis(&genesis).expect("reference genesis is valid");

    let mut nonces = [0u64; 3];
    let mut run = |chain: &mut Chain, who: usize, keys: &KeyPair, payload: Payload, step: &'static str| {
        let limit = chain.schedule().success_gas(&payload);
        let stx = Transaction::new(keys, nonces[who], limit, params.gas_price, payload).sign(keys);
        nonces[who] += 1;
        match chain.submit(&stx) {
            Ok(r @ Receipt { status: ExecStatus::Success, .. }) => Ok(r),
            _ => Err(CostError::Scenario(step)),
        }
    };

    let deploy = run(&mut chain, 0, &operator, Payload::Deploy, "deploy")?;
    run(&mut chain, 1, &seller, Payload::Register { name: String::from("seller") }, "register seller")?;
    run(&mut chain, 2, &buyer, Payload::Register { name: String::from("buyer") }, "register buyer")?;
    let listing = Payload::ListOffer(OfferSpec {
        energy_wh: 500,
        voltage: 24,
        price: REFERENCE_PRICE,
        postal_code: String::from("34450"),
        location: GeoPoint::from_micro(41_205_000, 29_073_000).expect("valid point"),
        offer_date: today,
    });
    let list = run(&mut chain, 1, &seller, listing, "list")?;

    let seller_before = chain.account(&seller.address()).balance;
    let buy = run(&mut chain, 2, &buyer, Payload::BuyOffer { offer_id: 0 }, "buy")?;
    let seller_gain = chain.account(&seller.address()).balance - seller_before;
    let seller_deduction = REFERENCE_PRICE - seller_gain;

    let gas = OperationGas { deploy: deploy.gas_used, list_offer: list.gas_used, buy_offer: buy.gas_used };
    Ok(CostReport {
        parameters: *params,
        gas,
        rows: alloc::vec![
            CostRow::new("deploy", gas.deploy, params),
            CostRow::new("list_offer", gas.list_offer, params),
            CostRow::new("buy_offer", gas.buy_offer, params),
        ],
        seller_deduction,
        selling_fee_pct: Decimal::from(seller_deduction) * Decimal::ONE_HUNDRED / Decimal::from(REFERENCE_PRICE),
        centralized: CentralizedFixture::default(),
    })
}

/// Yearly activity to cost out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnualScenario {
    pub listings_per_year: u64,
    pub sales_per_year: u64,
    pub avg_price_usd: Decimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecentralizedYear {
    pub deploy_usd: Decimal,
    pub listing_usd: Decimal,
    pub buying_usd: Decimal,
    pub seller_deduction_usd: Decimal,
    pub total_usd: Decimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CentralizedYear {
    pub server_usd: Decimal,
    pub listing_usd: Decimal,
    pub selling_fees_usd: Decimal,
    pub gateway_fees_usd: Decimal,
    pub buying_usd: Decimal,
    pub total_usd: Decimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnualCost {
    pub scenario: AnnualScenario,
    pub decentralized: DecentralizedYear,
    pub centralized: CentralizedYear,
}

/// First-year cost of each market type. Deployment is a one-time charge;
/// hosting is yearly.
pub fn annualize(
    scenario: &AnnualScenario,
    gas: &OperationGas,
    params: &CostParameters,
    fixture: &CentralizedFixture,
) -> AnnualCost {
    let listings = Decimal::from(scenario.listings_per_year);
    let sales = Decimal::from(scenario.sales_per_year);
    let turnover = sales * scenario.avg_price_usd;

    let deploy_usd = params.fee_usd(gas.deploy);
    let listing_usd = listings * params.fee_usd(gas.list_offer);
    let buying_usd = sales * params.fee_usd(gas.buy_offer);
    let decentralized = DecentralizedYear {
        deploy_usd,
        listing_usd,
        buying_usd,
        seller_deduction_usd: Decimal::ZERO,
        total_usd: deploy_usd + listing_usd + buying_usd,
    };

    let pct = |p: Decimal| turnover * p / Decimal::ONE_HUNDRED;
    let selling_fees_usd = pct(fixture.selling_fee_pct);
    let gateway_fees_usd = pct(fixture.payment_gateway_pct);
    let c_listing = listings * fixture.listing_fee_usd;
    let c_buying = sales * fixture.buying_fee_usd;
    let centralized = CentralizedYear {
        server_usd: fixture.server_yearly_usd,
        listing_usd: c_listing,
        selling_fees_usd,
        gateway_fees_usd,
        buying_usd: c_buying,
        total_usd: fixture.server_yearly_usd + c_listing + selling_fees_usd + gateway_fees_usd + c_buying,
    };

    AnnualCost { scenario: *scenario, decentralized, centralized }
}

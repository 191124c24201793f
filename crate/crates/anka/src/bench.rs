//! Cost benchmark: the operation fee table, the index-versus-scan query
//! comparison and a yearly cost projection.

use std::fmt::Write as _;
use std::path::Path;

use anka_core::chain::GenesisConfig;
use anka_core::cost::{
    annualize, measure_operation_costs, round_cents, AnnualCost, AnnualScenario, CostError, CostParameters,
    CostReport,
};
use anka_core::{
    Chain, DistanceMeters, GeoPoint, KeyPair, OfferSpec, Payload, PostalCode, BASE_UNITS_PER_TOKEN,
};
use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::client::prepare_with;

/// Synthetic market contents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub offers: usize,
    pub postal_codes: usize,
    /// When set, exactly this many offers go to the first postal code on
    /// the first day; the rest spread uniformly over the others.
    pub target_bucket: Option<usize>,
    /// Spread listings over this many consecutive days (within the offer window).
    pub days: u32,
    /// Per-mille of listings later bought, and later cancelled.
    pub buy_permille: u32,
    pub cancel_permille: u32,
    pub sellers: usize,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn uniform(offers: usize, postal_codes: usize, seed: u64) -> Self {
        WorkloadSpec {
            offers,
            postal_codes,
            target_bucket: None,
            days: 1,
            buy_permille: 0,
            cancel_permille: 0,
            sellers: 8,
            seed,
        }
    }
}

pub struct Workload {
    pub chain: Chain,
    pub postal_codes: Vec<PostalCode>,
    pub centers: Vec<GeoPoint>,
    pub dates: Vec<NaiveDate>,
}

pub const WORKLOAD_DATE: NaiveDate = match NaiveDate::from_ymd_opt(2026, 1, 1) {
    Some(d) => d,
    None => panic!(),
};

pub fn postal_code(i: usize) -> PostalCode {
    anka_core::normalize_postal(&format!("{:05}", 10_000 + i)).expect("five digits")
}

/// Builds a chain holding the workload, every offer placed through a signed
/// transaction.
pub fn build_workload(spec: &WorkloadSpec) -> Workload {
    assert!(spec.postal_codes > 0 && spec.sellers > 0 && spec.days > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let operator = KeyPair::from_label("workload-operator");
    let sellers: Vec<KeyPair> = (0..spec.sellers).map(|i| KeyPair::from_label(&format!("workload-seller-{i}"))).collect();
    let buyer = KeyPair::from_label("workload-buyer");
    let funds = 1_000_000 * BASE_UNITS_PER_TOKEN;
    let mut genesis = GenesisConfig::new(WORKLOAD_DATE).fund(operator.address(), funds).fund(buyer.address(), funds);
    for s in &sellers {
        genesis = genesis.fund(s.address(), funds);
    }
    let mut chain = Chain::genesis(&genesis).expect("valid genesis");
    let schedule = *chain.schedule();
    assert!(spec.days <= chain.market().config().offer_window_days, "days exceed the offer window");
    let voltages = chain.market().config().voltages.clone();

    let mut nonces = vec![0u64; spec.sellers + 2];
    let mut run = |chain: &mut Chain, who: usize, keys: &KeyPair, payload: Payload| {
        let stx = prepare_with(keys, nonces[who], &schedule, payload);
        nonces[who] += 1;
        let r = chain.submit(&stx).expect("workload tx admitted");
        assert!(r.is_success(), "workload tx reverted: {:?}", r.status);
    };
    run(&mut chain, 0, &operator, Payload::Deploy);
    run(&mut chain, 1, &buyer, Payload::Register { name: "buyer".into() });
    for (i, s) in sellers.iter().enumerate() {
        run(&mut chain, i + 2, s, Payload::Register { name: format!("seller {i}") });
    }

    let postal_codes: Vec<PostalCode> = (0..spec.postal_codes).map(postal_code).collect();
    let centers: Vec<GeoPoint> = (0..spec.postal_codes)
        .map(|_| GeoPoint::from_degrees(rng.gen_range(36.0..42.0), rng.gen_range(26.0..45.0)).expect("in range"))
        .collect();
    let dates: Vec<NaiveDate> = (0..spec.days).map(|d| WORKLOAD_DATE + Days::new(d.into())).collect();

    let target = spec.target_bucket.map(|b| b.min(spec.offers));
    for n in 0..spec.offers {
        let (p, day) = match target {
            Some(b) if n < b => (0, 0),
            Some(_) if spec.postal_codes > 1 => (rng.gen_range(1..spec.postal_codes), rng.gen_range(0..dates.len())),
            Some(_) => panic!("a target bucket needs a second postal code for the remaining offers"),
            None => (rng.gen_range(0..spec.postal_codes), rng.gen_range(0..dates.len())),
        };
        let c = centers[p];
        let location = GeoPoint::from_degrees(
            (c.lat() + rng.gen_range(-0.05..0.05)).clamp(-90.0, 90.0),
            (c.lon() + rng.gen_range(-0.05..0.05)).clamp(-180.0, 180.0),
        )
        .expect("in range");
        let seller = n % spec.sellers;
        run(
            &mut chain,
            seller + 2,
            &sellers[seller],
            Payload::ListOffer(OfferSpec {
                energy_wh: rng.gen_range(1..5_000),
                voltage: voltages[rng.gen_range(0..voltages.len())],
                price: rng.gen_range(1..1_000_000),
                postal_code: postal_codes[p].as_str().to_string(),
                location,
                offer_date: dates[day],
            }),
        );
    }

    for id in 0..spec.offers as u64 {
        let roll = rng.gen_range(0..1000);
        if roll < spec.buy_permille {
            run(&mut chain, 1, &buyer, Payload::BuyOffer { offer_id: id });
        } else if roll < spec.buy_permille + spec.cancel_permille {
            let seller = id as usize % spec.sellers;
            run(&mut chain, seller + 2, &sellers[seller], Payload::CancelOffer { offer_id: id });
        }
    }
    Workload { chain, postal_codes, centers, dates }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRow {
    pub offers: usize,
    pub postal_codes: usize,
    pub bucket: usize,
    pub index_gas: u64,
    pub index_results: usize,
    pub scan_gas: u64,
    pub scan_results: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn fit_affine(points: &[(f64, f64)]) -> Option<AffineFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(AffineFit { intercept, slope, r_squared })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryComparison {
    pub rows: Vec<QueryRow>,
    pub scan_fit: Option<AffineFit>,
}

/// Diameter the scan strategy searches around the target bucket's center.
pub const SCAN_DIAMETER_KM: f64 = 10.0;

/// Gas of a bucket lookup and of the full on-chain scan for each market
/// size in `offer_counts`, with the target bucket held at `bucket` offers.
pub fn compare_query_strategies(offer_counts: &[usize], postal_codes: usize, bucket: usize, seed: u64) -> QueryComparison {
    let diameter = DistanceMeters::from_km(SCAN_DIAMETER_KM).expect("positive");
    let rows: Vec<QueryRow> = offer_counts
        .iter()
        .map(|&n| {
            let spec = WorkloadSpec { target_bucket: Some(bucket), ..WorkloadSpec::uniform(n, postal_codes, seed) };
            let w = build_workload(&spec);
            let (c, date) = (&w.chain, w.dates[0]);
            let index = c.market().get_offers(c.schedule(), date, &w.postal_codes[0], None);
            let scan = c.market().get_offers_by_diameter_onchain(c.schedule(), w.centers[0], diameter, date);
            QueryRow {
                offers: n,
                postal_codes,
                bucket: bucket.min(n),
                index_gas: index.gas_used,
                index_results: index.value.len(),
                scan_gas: scan.gas_used,
                scan_results: scan.value.len(),
            }
        })
        .collect();
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.offers as f64, r.scan_gas as f64)).collect();
    QueryComparison { scan_fit: fit_affine(&points), rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub offers: Vec<usize>,
    pub postal_codes: usize,
    pub bucket: usize,
    pub seed: u64,
    pub params: CostParameters,
    pub annual: AnnualScenario,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            offers: vec![10, 100, 1000],
            postal_codes: 100,
            bucket: 5,
            seed: 42,
            params: CostParameters::default(),
            annual: AnnualScenario { listings_per_year: 100, sales_per_year: 50, avg_price_usd: Decimal::new(20, 0) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub costs: CostReport,
    pub queries: QueryComparison,
    pub annual: AnnualCost,
}

pub fn run(opts: &BenchOptions) -> Result<BenchReport, CostError> {
    let costs = measure_operation_costs(&opts.params)?;
    let queries = compare_query_strategies(&opts.offers, opts.postal_codes, opts.bucket, opts.seed);
    let annual = annualize(&opts.annual, &costs.gas, &opts.params, &costs.centralized);
    Ok(BenchReport { costs, queries, annual })
}

fn usd(d: Decimal) -> String {
    format!("${:.2}", round_cents(d))
}

pub fn render_text(r: &BenchReport) -> String {
    let mut s = String::new();
    let c = &r.costs;
    let f = &c.centralized;
    let _ = writeln!(s, "Operation fees at {} gwei/gas, {} USD/gwei", c.parameters.gas_price, c.parameters.usd_per_gwei);
    let _ = writeln!(s, "{:<22} {:>12} {:>14} {:>10} {:>14}", "operation", "gas", "fee (gwei)", "fee (USD)", "centralized");
    let reference = |op: &str| match op {
        "deploy" => format!("{} yearly", usd(f.server_yearly_usd)),
        "list_offer" => usd(f.listing_fee_usd),
        "buy_offer" => usd(f.buying_fee_usd),
        _ => String::new(),
    };
    for row in &c.rows {
        let _ = writeln!(
            s,
            "{:<22} {:>12} {:>14} {:>10} {:>14}",
            row.operation,
            row.gas_used,
            row.fee_gwei,
            usd(row.fee_usd),
            reference(&row.operation)
        );
    }
    let _ = writeln!(s, "{:<22} {:>12} {:>14} {:>9}% {:>13}%", "selling fee", "-", c.seller_deduction, c.selling_fee_pct.normalize(), f.selling_fee_pct);
    let _ = writeln!(s, "{:<22} {:>12} {:>14} {:>9}% {:>13}%", "payment gateway", "-", 0, 0, f.payment_gateway_pct);

    let _ = writeln!(s, "\nQuery gas: postal-code index vs on-chain area scan ({} km)", SCAN_DIAMETER_KM);
    let _ = writeln!(s, "{:>8} {:>8} {:>8} {:>12} {:>8} {:>12} {:>8}", "offers", "postal", "bucket", "index gas", "hits", "scan gas", "hits");
    for q in &r.queries.rows {
        let _ = writeln!(
            s,
            "{:>8} {:>8} {:>8} {:>12} {:>8} {:>12} {:>8}",
            q.offers, q.postal_codes, q.bucket, q.index_gas, q.index_results, q.scan_gas, q.scan_results
        );
    }
    if let Some(fit) = r.queries.scan_fit {
        let _ = writeln!(s, "scan gas = {:.1} + {:.1} * offers (R^2 = {:.6})", fit.intercept, fit.slope, fit.r_squared);
    }

    let a = &r.annual;
    let _ = writeln!(
        s,
        "\nFirst year, {} listings, {} sales at {} avg",
        a.scenario.listings_per_year,
        a.scenario.sales_per_year,
        usd(a.scenario.avg_price_usd)
    );
    let _ = writeln!(s, "{:<22} {:>14} {:>14}", "", "decentralized", "centralized");
    let d = &a.decentralized;
    let z = &a.centralized;
    for (label, l, r) in [
        ("deploy / server", d.deploy_usd, z.server_usd),
        ("listing", d.listing_usd, z.listing_usd),
        ("buying", d.buying_usd, z.buying_usd),
        ("selling fees", d.seller_deduction_usd, z.selling_fees_usd),
        ("payment gateway", Decimal::ZERO, z.gateway_fees_usd),
        ("total", d.total_usd, z.total_usd),
    ] {
        let _ = writeln!(s, "{:<22} {:>14} {:>14}", label, usd(l), usd(r));
    }
    s
}

pub fn write_csv(rows: &[QueryRow], path: &Path) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_fit_recovers_exact_line() {
        let pts: Vec<_> = [0.0, 10.0, 100.0, 1000.0].iter().map(|&x| (x, 200.0 + 250.0 * x)).collect();
        let f = fit_affine(&pts).unwrap();
        assert!((f.slope - 250.0).abs() < 1e-9 && (f.intercept - 200.0).abs() < 1e-6);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_affine(&[(1.0, 1.0)]).is_none());
        assert!(fit_affine(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
    }

    #[test]
    fn empty_market_costs_constant_gas() {
        let q = compare_query_strategies(&[0], 4, 5, 1);
        let row = &q.rows[0];
        let s = anka_core::GasSchedule::default();
        assert_eq!((row.index_results, row.scan_results), (0, 0));
        assert_eq!(row.index_gas, s.scan_gas(0));
        assert_eq!(row.scan_gas, s.storage_read);
    }

    #[test]
    fn target_bucket_is_exact() {
        let w = build_workload(&WorkloadSpec { target_bucket: Some(3), ..WorkloadSpec::uniform(40, 5, 9) });
        assert_eq!(w.chain.market().bucket(w.dates[0], &w.postal_codes[0]).len(), 3);
        assert_eq!(w.chain.market().offers().len(), 40);
    }

    #[test]
    fn workload_is_seeded() {
        let spec = WorkloadSpec { days: 2, buy_permille: 300, cancel_permille: 100, ..WorkloadSpec::uniform(60, 7, 3) };
        assert_eq!(build_workload(&spec).chain.state_hash(), build_workload(&spec).chain.state_hash());
        let other = WorkloadSpec { seed: 4, ..spec };
        assert_ne!(build_workload(&other).chain.state_hash(), build_workload(&spec).chain.state_hash());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        write_csv(&compare_query_strategies(&[10, 20], 5, 2, 1).rows, &path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("offers,postal_codes,bucket,index_gas,index_results,scan_gas,scan_results\n"));
        assert_eq!(text.lines().count(), 3);
    }
}

//! Fundamental metric packs for the Quantitative agent.
//!
//! Fine-grained packs hold trailing-twelve-month ratios plus their
//! month-over-month arithmetic diffs; coarse-grained packs hold raw
//! statement line items plus month-over-month rates of change. Division by
//! zero or by a missing value always yields the missing marker, never an
//! infinity.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{PriceSeries, StatementRecord, Ticker};
use crate::time::Month;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FundamentalsError {
    #[error("no metric packs supplied")]
    EmptyInput,
    #[error("ticker {0} has no sector in the universe")]
    UnknownTicker(String),
}

/// Trailing-twelve-month sums of the flow line items. A value is present
/// only when the covering periods span exactly 12 months and every covering
/// period carries the item.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TtmAggregate {
    pub sales: Option<f64>,
    pub cost_of_sales: Option<f64>,
    pub operating_profit: Option<f64>,
    pub net_income: Option<f64>,
    pub depreciation: Option<f64>,
    pub operating_cf: Option<f64>,
    pub investing_cf: Option<f64>,
    pub eps: Option<f64>,
    pub dividends_per_share: Option<f64>,
    /// Months covered by the selected periods, 0..=12.
    pub coverage_months: u32,
}

/// A metric value and its arithmetic change from the prior month's value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: Option<f64>,
    pub diff: Option<f64>,
}

/// The fine-grained metric pack: 16 ratio/growth metrics with diffs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FineMetricPack {
    pub net_margin: MetricValue,
    pub roa: MetricValue,
    pub roe: MetricValue,
    pub asset_turnover: MetricValue,
    pub inventory_turn_days: MetricValue,
    pub per: MetricValue,
    pub fcf: MetricValue,
    pub fcf_margin: MetricValue,
    pub ebitda: MetricValue,
    pub equity_ratio: MetricValue,
    pub quick_ratio: MetricValue,
    pub de_ratio: MetricValue,
    pub sales_yoy: MetricValue,
    pub sales_cagr_3y: MetricValue,
    pub eps_growth: MetricValue,
    pub dps: MetricValue,
    /// True when a statement was published within the as-of month.
    pub info_updated: bool,
}

/// A raw line-item value and its month-over-month rate of change (percent).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ItemValue {
    pub value: Option<f64>,
    pub roc: Option<f64>,
}

/// The coarse-grained pack: latest raw line items with RoC, historical EPS
/// lookbacks, and the monthly close.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoarsePack {
    pub sales: ItemValue,
    pub cost_of_sales: ItemValue,
    pub operating_profit: ItemValue,
    pub net_income: ItemValue,
    pub depreciation: ItemValue,
    pub total_assets: ItemValue,
    pub equity: ItemValue,
    pub cash: ItemValue,
    pub receivables: ItemValue,
    pub financial_assets: ItemValue,
    pub inventory: ItemValue,
    pub current_liabilities: ItemValue,
    pub interest_bearing_debt: ItemValue,
    pub operating_cf: ItemValue,
    pub investing_cf: ItemValue,
    pub eps: ItemValue,
    pub dividends_per_share: ItemValue,
    pub issued_shares: ItemValue,
    pub monthly_close: ItemValue,
    pub eps_1y_ago: Option<f64>,
    pub eps_3y_ago: Option<f64>,
    pub info_updated: bool,
}

/// Labeled metric values in deterministic order, used for sector averaging
/// and prompt context blocks.
pub type MetricMap = BTreeMap<String, Option<f64>>;

/// Per-metric mean ignoring missing values, with contributor counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SectorAverage {
    pub sector: String,
    /// metric label -> (mean, contributor count); mean is None when no
    /// constituent carried the metric.
    pub metrics: BTreeMap<String, (Option<f64>, usize)>,
}

fn guarded_div(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    match (num, den) {
        (Some(n), Some(d)) if d != 0.0 => Some(n / d),
        _ => None,
    }
}

fn growth(cur: Option<f64>, prior: Option<f64>) -> Option<f64> {
    match (cur, prior) {
        // Change relative to the prior magnitude keeps the sign meaningful
        // for negative bases (e.g. EPS recovering from a loss).
        (Some(c), Some(p)) if p != 0.0 => Some((c - p) / p.abs()),
        _ => None,
    }
}

fn diff(cur: Option<f64>, prior: Option<f64>) -> Option<f64> {
    match (cur, prior) {
        (Some(c), Some(p)) => Some(c - p),
        _ => None,
    }
}

/// Deduplicate to the latest publication per (period_type, period_end) and
/// sort by period end descending.
fn visible_records(statements: &[StatementRecord], asof: NaiveDate) -> Vec<&StatementRecord> {
    let mut latest: BTreeMap<(NaiveDate, u32), &StatementRecord> = BTreeMap::new();
    for r in statements.iter().filter(|r| r.publish_date <= asof) {
        let key = (r.period_end, r.period_type.months());
        let replace = match latest.get(&key) {
            Some(existing) => existing.publish_date < r.publish_date,
            None => true,
        };
        if replace {
            latest.insert(key, r);
        }
    }
    let mut out: Vec<&StatementRecord> = latest.into_values().collect();
    out.sort_by_key(|r| std::cmp::Reverse((r.period_end, r.period_type.months())));
    out
}

/// TTM anchored at the most recent visible period end.
pub fn ttm(statements: &[StatementRecord], asof: NaiveDate) -> TtmAggregate {
    ttm_anchored(statements, asof, None)
}

/// TTM whose covering window ends at `anchor` (the month of the latest
/// usable period end) when given, or at the most recent visible period end
/// otherwise. Selection walks backwards greedily, preferring the longest
/// period that still fits the remaining coverage.
pub fn ttm_anchored(
    statements: &[StatementRecord],
    asof: NaiveDate,
    anchor: Option<Month>,
) -> TtmAggregate {
    let records = visible_records(statements, asof);
    let records: Vec<&StatementRecord> = match anchor {
        Some(a) => records
            .into_iter()
            .filter(|r| Month::from_date(r.period_end) <= a)
            .collect(),
        None => records,
    };
    let Some(latest) = records.first() else {
        return TtmAggregate::default();
    };

    let mut chosen: Vec<&StatementRecord> = Vec::new();
    let mut covered = 0u32;
    let mut cursor = Month::from_date(latest.period_end);
    while covered < 12 {
        let remaining = 12 - covered;
        let candidate = records
            .iter()
            .copied()
            .filter(|r| Month::from_date(r.period_end) == cursor)
            .filter(|r| r.period_type.months() <= remaining)
            .max_by_key(|r| r.period_type.months());
        match candidate {
            Some(r) => {
                covered += r.period_type.months();
                cursor = cursor.add_months(-(r.period_type.months() as i32));
                chosen.push(r);
            }
            None => break,
        }
    }

    let mut agg = TtmAggregate {
        coverage_months: covered,
        ..TtmAggregate::default()
    };
    if covered < 12 {
        return agg;
    }
    let sum_item = |get: fn(&StatementRecord) -> Option<f64>| -> Option<f64> {
        let mut total = 0.0;
        for r in &chosen {
            total += get(r)?;
        }
        Some(total)
    };
    agg.sales = sum_item(|r| r.items.sales);
    agg.cost_of_sales = sum_item(|r| r.items.cost_of_sales);
    agg.operating_profit = sum_item(|r| r.items.operating_profit);
    agg.net_income = sum_item(|r| r.items.net_income);
    agg.depreciation = sum_item(|r| r.items.depreciation);
    agg.operating_cf = sum_item(|r| r.items.operating_cf);
    agg.investing_cf = sum_item(|r| r.items.investing_cf);
    agg.eps = sum_item(|r| r.items.eps);
    agg.dividends_per_share = sum_item(|r| r.items.dividends_per_share);
    agg
}

/// Last close within the month of `asof`, at or before `asof`.
fn monthly_close(prices: &PriceSeries, asof: NaiveDate) -> Option<f64> {
    let idx = prices.index_on_or_before(asof)?;
    let bar = prices.bars[idx];
    (Month::from_date(bar.date) == Month::from_date(asof)).then_some(bar.close)
}

fn fine_values_at(
    statements: &[StatementRecord],
    prices: &PriceSeries,
    asof: NaiveDate,
) -> BTreeMap<&'static str, Option<f64>> {
    let cur = ttm(statements, asof);
    let records = visible_records(statements, asof);
    let latest = records.first();
    let stock = |get: fn(&StatementRecord) -> Option<f64>| latest.and_then(|r| get(r));

    let total_assets = stock(|r| r.items.total_assets);
    let equity = stock(|r| r.items.equity);
    let inventory = stock(|r| r.items.inventory);
    let cash = stock(|r| r.items.cash);
    let receivables = stock(|r| r.items.receivables);
    let financial_assets = stock(|r| r.items.financial_assets);
    let current_liabilities = stock(|r| r.items.current_liabilities);
    let debt = stock(|r| r.items.interest_bearing_debt);

    let anchor = latest.map(|r| Month::from_date(r.period_end));
    let prior_year = anchor.map(|a| ttm_anchored(statements, asof, Some(a.add_months(-12))));
    let three_years = anchor.map(|a| ttm_anchored(statements, asof, Some(a.add_months(-36))));

    let close = monthly_close(prices, asof);
    let quick_assets = match (cash, receivables, financial_assets) {
        (Some(c), Some(r), Some(f)) => Some(c + r + f),
        _ => None,
    };
    let fcf = match (cur.operating_cf, cur.investing_cf) {
        (Some(o), Some(i)) => Some(o + i),
        _ => None,
    };
    let ebitda = match (cur.operating_profit, cur.depreciation) {
        (Some(o), Some(d)) => Some(o + d),
        _ => None,
    };
    let cagr = match (cur.sales, three_years.as_ref().and_then(|t| t.sales)) {
        (Some(c), Some(p)) if c > 0.0 && p > 0.0 => Some((c / p).powf(1.0 / 3.0) - 1.0),
        _ => None,
    };

    let mut out = BTreeMap::new();
    out.insert("net_margin", guarded_div(cur.net_income, cur.sales));
    out.insert("roa", guarded_div(cur.net_income, total_assets));
    out.insert("roe", guarded_div(cur.net_income, equity));
    out.insert("asset_turnover", guarded_div(cur.sales, total_assets));
    out.insert(
        "inventory_turn_days",
        guarded_div(inventory.map(|i| 365.0 * i), cur.cost_of_sales),
    );
    out.insert("per", guarded_div(close, cur.eps));
    out.insert("fcf", fcf);
    out.insert("fcf_margin", guarded_div(fcf, cur.sales));
    out.insert("ebitda", ebitda);
    out.insert("equity_ratio", guarded_div(equity, total_assets));
    out.insert(
        "quick_ratio",
        guarded_div(quick_assets, current_liabilities),
    );
    out.insert("de_ratio", guarded_div(debt, equity));
    out.insert(
        "sales_yoy",
        growth(cur.sales, prior_year.as_ref().and_then(|t| t.sales)),
    );
    out.insert("sales_cagr_3y", cagr);
    out.insert(
        "eps_growth",
        growth(cur.eps, prior_year.as_ref().and_then(|t| t.eps)),
    );
    out.insert("dps", cur.dividends_per_share);
    out
}

fn info_updated(statements: &[StatementRecord], asof: NaiveDate) -> bool {
    let month = Month::from_date(asof);
    statements
        .iter()
        .any(|r| r.publish_date <= asof && Month::from_date(r.publish_date) == month)
}

/// Month-end date used for "one month earlier" comparisons: the last
/// calendar day of the prior month.
fn prior_month_asof(asof: NaiveDate) -> NaiveDate {
    Month::from_date(asof).prev().last_day()
}

/// The fine-grained metric pack at `asof`, with diffs against the pack one
/// month earlier. Inputs must already be leakage-filtered to `asof`.
pub fn fine_metrics(
    statements: &[StatementRecord],
    prices: &PriceSeries,
    asof: NaiveDate,
) -> FineMetricPack {
    let cur = fine_values_at(statements, prices, asof);
    let prior = fine_values_at(statements, prices, prior_month_asof(asof));
    let metric = |name: &str| MetricValue {
        value: cur[name],
        diff: diff(cur[name], prior[name]),
    };
    FineMetricPack {
        net_margin: metric("net_margin"),
        roa: metric("roa"),
        roe: metric("roe"),
        asset_turnover: metric("asset_turnover"),
        inventory_turn_days: metric("inventory_turn_days"),
        per: metric("per"),
        fcf: metric("fcf"),
        fcf_margin: metric("fcf_margin"),
        ebitda: metric("ebitda"),
        equity_ratio: metric("equity_ratio"),
        quick_ratio: metric("quick_ratio"),
        de_ratio: metric("de_ratio"),
        sales_yoy: metric("sales_yoy"),
        sales_cagr_3y: metric("sales_cagr_3y"),
        eps_growth: metric("eps_growth"),
        dps: metric("dps"),
        info_updated: info_updated(statements, asof),
    }
}

fn latest_item(
    records: &[&StatementRecord],
    get: fn(&StatementRecord) -> Option<f64>,
) -> Option<f64> {
    records.iter().find_map(|r| get(r))
}

fn coarse_values_at(
    statements: &[StatementRecord],
    prices: &PriceSeries,
    asof: NaiveDate,
) -> BTreeMap<&'static str, Option<f64>> {
    let records = visible_records(statements, asof);
    let mut out = BTreeMap::new();
    macro_rules! item {
        ($name:ident) => {
            out.insert(stringify!($name), latest_item(&records, |r| r.items.$name));
        };
    }
    item!(sales);
    item!(cost_of_sales);
    item!(operating_profit);
    item!(net_income);
    item!(depreciation);
    item!(total_assets);
    item!(equity);
    item!(cash);
    item!(receivables);
    item!(financial_assets);
    item!(inventory);
    item!(current_liabilities);
    item!(interest_bearing_debt);
    item!(operating_cf);
    item!(investing_cf);
    item!(eps);
    item!(dividends_per_share);
    item!(issued_shares);
    out.insert("monthly_close", monthly_close(prices, asof));
    out
}

fn roc_pct(cur: Option<f64>, prior: Option<f64>) -> Option<f64> {
    match (cur, prior) {
        (Some(c), Some(p)) if p != 0.0 => Some(100.0 * (c / p - 1.0)),
        _ => None,
    }
}

/// The coarse-grained raw pack at `asof`: latest line items with
/// month-over-month RoC, EPS lookbacks at 12 and 36 months, and the monthly
/// close.
pub fn coarse_pack(
    statements: &[StatementRecord],
    prices: &PriceSeries,
    asof: NaiveDate,
) -> CoarsePack {
    let cur = coarse_values_at(statements, prices, asof);
    let prior = coarse_values_at(statements, prices, prior_month_asof(asof));
    let item = |name: &str| ItemValue {
        value: cur[name],
        roc: roc_pct(cur[name], prior[name]),
    };
    let records = visible_records(statements, asof);
    let anchor = records.first().map(|r| Month::from_date(r.period_end));
    let eps_lookback = |months_back: i32| -> Option<f64> {
        let anchor = anchor?;
        let cutoff = anchor.add_months(-months_back);
        records
            .iter()
            .find(|r| Month::from_date(r.period_end) <= cutoff)
            .and_then(|r| r.items.eps)
    };
    CoarsePack {
        sales: item("sales"),
        cost_of_sales: item("cost_of_sales"),
        operating_profit: item("operating_profit"),
        net_income: item("net_income"),
        depreciation: item("depreciation"),
        total_assets: item("total_assets"),
        equity: item("equity"),
        cash: item("cash"),
        receivables: item("receivables"),
        financial_assets: item("financial_assets"),
        inventory: item("inventory"),
        current_liabilities: item("current_liabilities"),
        interest_bearing_debt: item("interest_bearing_debt"),
        operating_cf: item("operating_cf"),
        investing_cf: item("investing_cf"),
        eps: item("eps"),
        dividends_per_share: item("dividends_per_share"),
        issued_shares: item("issued_shares"),
        monthly_close: item("monthly_close"),
        eps_1y_ago: eps_lookback(12),
        eps_3y_ago: eps_lookback(36),
        info_updated: info_updated(statements, asof),
    }
}

impl FineMetricPack {
    /// Metric values keyed by label, for sector averaging and the sector
    /// prompt's comparative context.
    pub fn sector_context_map(&self) -> MetricMap {
        let mut m = MetricMap::new();
        m.insert("net_margin".into(), self.net_margin.value);
        m.insert("roa".into(), self.roa.value);
        m.insert("roe".into(), self.roe.value);
        m.insert("asset_turnover".into(), self.asset_turnover.value);
        m.insert("inventory_turn_days".into(), self.inventory_turn_days.value);
        m.insert("per".into(), self.per.value);
        m.insert("fcf".into(), self.fcf.value);
        m.insert("fcf_margin".into(), self.fcf_margin.value);
        m.insert("ebitda".into(), self.ebitda.value);
        m.insert("equity_ratio".into(), self.equity_ratio.value);
        m.insert("quick_ratio".into(), self.quick_ratio.value);
        m.insert("de_ratio".into(), self.de_ratio.value);
        m.insert("sales_yoy".into(), self.sales_yoy.value);
        m.insert("sales_cagr_3y".into(), self.sales_cagr_3y.value);
        m.insert("eps_growth".into(), self.eps_growth.value);
        m.insert("dps".into(), self.dps.value);
        m
    }
}

impl CoarsePack {
    /// RoC values keyed by label; the coarse sector context compares rates
    /// of change rather than levels.
    pub fn sector_context_map(&self) -> MetricMap {
        let mut m = MetricMap::new();
        m.insert("sales_roc".into(), self.sales.roc);
        m.insert("cost_of_sales_roc".into(), self.cost_of_sales.roc);
        m.insert("operating_profit_roc".into(), self.operating_profit.roc);
        m.insert("net_income_roc".into(), self.net_income.roc);
        m.insert("depreciation_roc".into(), self.depreciation.roc);
        m.insert("total_assets_roc".into(), self.total_assets.roc);
        m.insert("equity_roc".into(), self.equity.roc);
        m.insert("cash_roc".into(), self.cash.roc);
        m.insert("receivables_roc".into(), self.receivables.roc);
        m.insert("financial_assets_roc".into(), self.financial_assets.roc);
        m.insert("inventory_roc".into(), self.inventory.roc);
        m.insert(
            "current_liabilities_roc".into(),
            self.current_liabilities.roc,
        );
        m.insert(
            "interest_bearing_debt_roc".into(),
            self.interest_bearing_debt.roc,
        );
        m.insert("operating_cf_roc".into(), self.operating_cf.roc);
        m.insert("investing_cf_roc".into(), self.investing_cf.roc);
        m.insert("dividends_roc".into(), self.dividends_per_share.roc);
        m.insert("issued_shares_roc".into(), self.issued_shares.roc);
        m.insert("monthly_close_roc".into(), self.monthly_close.roc);
        m
    }
}

/// Extra valuation metrics derivable from the same inputs but not part of
/// the prompt pack: current ratio, EV/EBITDA (EV = market cap + debt -
/// cash), dividend yield.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivedExtras {
    pub current_ratio: Option<f64>,
    pub ev_ebitda: Option<f64>,
    pub dividend_yield: Option<f64>,
}

pub fn derived_extras(
    statements: &[StatementRecord],
    prices: &PriceSeries,
    asof: NaiveDate,
) -> DerivedExtras {
    let cur = ttm(statements, asof);
    let records = visible_records(statements, asof);
    let Some(latest) = records.first() else {
        return DerivedExtras::default();
    };
    let items = &latest.items;
    let close = monthly_close(prices, asof);
    let current_assets = match (
        items.cash,
        items.receivables,
        items.financial_assets,
        items.inventory,
    ) {
        (Some(c), Some(r), Some(f), Some(i)) => Some(c + r + f + i),
        _ => None,
    };
    let market_cap = match (close, items.issued_shares) {
        (Some(p), Some(s)) => Some(p * s),
        _ => None,
    };
    let ev = match (market_cap, items.interest_bearing_debt, items.cash) {
        (Some(m), Some(d), Some(c)) => Some(m + d - c),
        _ => None,
    };
    let ebitda = match (cur.operating_profit, cur.depreciation) {
        (Some(o), Some(d)) => Some(o + d),
        _ => None,
    };
    DerivedExtras {
        current_ratio: guarded_div(current_assets, items.current_liabilities),
        ev_ebitda: guarded_div(ev, ebitda),
        dividend_yield: guarded_div(cur.dividends_per_share, close),
    }
}

/// Per-sector arithmetic mean of each metric, ignoring missing values.
/// Tickers are grouped by the sector labels in `universe`.
pub fn sector_averages(
    packs: &BTreeMap<String, MetricMap>,
    universe: &[Ticker],
) -> Result<BTreeMap<String, SectorAverage>, FundamentalsError> {
    if packs.is_empty() {
        return Err(FundamentalsError::EmptyInput);
    }
    let mut by_sector: BTreeMap<String, Vec<&MetricMap>> = BTreeMap::new();
    for (code, map) in packs {
        let sector = universe
            .iter()
            .find(|t| &t.code == code)
            .map(|t| t.sector.clone())
            .ok_or_else(|| FundamentalsError::UnknownTicker(code.clone()))?;
        by_sector.entry(sector).or_default().push(map);
    }
    let mut out = BTreeMap::new();
    for (sector, maps) in by_sector {
        let mut metrics: BTreeMap<String, (Option<f64>, usize)> = BTreeMap::new();
        for map in &maps {
            for (label, value) in map.iter() {
                let entry = metrics.entry(label.clone()).or_insert((None, 0));
                if let Some(v) = value {
                    entry.0 = Some(entry.0.unwrap_or(0.0) + v);
                    entry.1 += 1;
                }
            }
        }
        for (sum, count) in metrics.values_mut() {
            if *count > 0 {
                *sum = sum.map(|s| s / *count as f64);
            }
        }
        out.insert(sector.clone(), SectorAverage { sector, metrics });
    }
    Ok(out)
}

/// Ratio metrics are dimensionless: rescaling all monetary line items by a
/// positive constant leaves them unchanged, while `fcf` and `ebitda` scale
/// with the constant. Used by scale-invariance tests.
pub const SCALE_INVARIANT_METRICS: [&str; 13] = [
    "net_margin",
    "roa",
    "roe",
    "asset_turnover",
    "inventory_turn_days",
    "equity_ratio",
    "quick_ratio",
    "de_ratio",
    "sales_yoy",
    "sales_cagr_3y",
    "eps_growth",
    "per",
    "fcf_margin",
];

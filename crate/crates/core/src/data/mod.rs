//! Market data: domain types, fixture loading, and point-in-time slicing.
//!
//! Everything downstream of this module sees data through a [`DataView`]
//! produced by [`slice_asof`], which drops every record dated after the
//! decision date. Backtests only reach past the decision date through
//! [`DataRepository::open_on`], the execution-price lookup used for realized
//! performance, never for prompts.

mod calendar;
mod load;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::Month;

pub use calendar::{rebalance_schedule, RebalancePair, TradingCalendar};
pub use load::{load_repository, save_repository, LoadReport, RejectedRow};

/// The fixed macro indicator set: names accepted in `macro.jsonl`.
pub const MACRO_INDICATORS: [&str; 18] = [
    "us_fed_funds",
    "us_10y_yield",
    "jp_policy_rate",
    "jp_10y_yield",
    "us_cpi",
    "jp_cpi",
    "gold",
    "crude_oil",
    "us_payrolls",
    "us_industrial_production",
    "us_housing_starts",
    "us_unemployment",
    "jp_business_conditions",
    "usd_jpy",
    "nikkei_225",
    "sp_500",
    "us_vix",
    "nikkei_vi",
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("universe file not found or unreadable: {path}: {source}")]
    UniverseFile {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}:{line}: malformed row: {message}")]
    MalformedRow {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: duplicate price date {date} for ticker {ticker}")]
    DuplicatePriceDate {
        path: String,
        line: usize,
        ticker: String,
        date: NaiveDate,
    },
    #[error("duplicate ticker code {0} in universe")]
    DuplicateTicker(String),
    #[error("empty universe")]
    EmptyUniverse,
    #[error("calendar has no business day in {month}")]
    CalendarGap { month: Month },
    #[error("invalid month window: {start} > {end}")]
    InvalidWindow { start: Month, end: Month },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// An exchange symbol plus its sector label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ticker {
    pub code: String,
    pub sector: String,
}

/// One daily bar. Decisions use closes; executions use opens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBar {
    pub date: NaiveDate,
    pub open: f64,
    pub close: f64,
}

/// Date-ordered daily bars for one ticker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub ticker: Ticker,
    pub bars: Vec<PriceBar>,
}

impl PriceSeries {
    /// Index of the bar dated exactly `date`.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.bars.binary_search_by_key(&date, |b| b.date).ok()
    }

    /// Index of the latest bar dated on or before `date`.
    pub fn index_on_or_before(&self, date: NaiveDate) -> Option<usize> {
        match self.bars.binary_search_by_key(&date, |b| b.date) {
            Ok(i) => Some(i),
            Err(0) => None,
            Err(i) => Some(i - 1),
        }
    }

    /// Closes up to and including `asof` (which must be a bar date).
    pub fn closes_through(&self, asof: NaiveDate) -> Option<&[PriceBar]> {
        let i = self.index_of(asof)?;
        Some(&self.bars[..=i])
    }

    /// Last close on or before `date`.
    pub fn close_on_or_before(&self, date: NaiveDate) -> Option<f64> {
        self.index_on_or_before(date).map(|i| self.bars[i].close)
    }
}

/// Reporting period granularity of a financial statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeriodType {
    Quarterly,
    SemiAnnual,
    Annual,
}

impl PeriodType {
    /// Months of flow activity the period covers.
    pub fn months(&self) -> u32 {
        match self {
            PeriodType::Quarterly => 3,
            PeriodType::SemiAnnual => 6,
            PeriodType::Annual => 12,
        }
    }
}

/// Numeric statement line items; `None` is the explicit missing marker and
/// renders as the literal `NaN` downstream.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LineItems {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sales: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cost_of_sales: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub operating_profit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub net_income: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub depreciation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub total_assets: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub equity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cash: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub receivables: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub financial_assets: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inventory: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub current_liabilities: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub interest_bearing_debt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub operating_cf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub investing_cf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dividends_per_share: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub issued_shares: Option<f64>,
}

/// Qualitative text sections extracted from a securities report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatementTexts {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub business_overview: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub business_risks: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mdna: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub governance: Option<String>,
}

impl StatementTexts {
    pub fn is_empty(&self) -> bool {
        self.business_overview.is_none()
            && self.business_risks.is_none()
            && self.mdna.is_none()
            && self.governance.is_none()
    }
}

/// One published financial statement. `publish_date` is the point-in-time
/// key: a record only becomes visible once published.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementRecord {
    pub ticker: String,
    pub period_type: PeriodType,
    pub period_end: NaiveDate,
    pub publish_date: NaiveDate,
    pub items: LineItems,
    #[serde(skip_serializing_if = "StatementTexts::is_empty", default)]
    pub texts: StatementTexts,
}

/// A news headline with pre-tagged ticker matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsItem {
    pub ticker_matches: Vec<String>,
    pub date: NaiveDate,
    pub headline: String,
    pub summary: String,
}

/// Level and month-over-month rate of change of one macro indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroIndicator {
    pub level: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mom_roc: Option<f64>,
}

/// Latest available macro indicator values for one month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroSnapshot {
    pub as_of: Month,
    pub indicators: BTreeMap<String, MacroIndicator>,
}

/// Immutable store of everything loaded from fixtures. Safe to share
/// read-only across workers once loaded.
#[derive(Debug, Clone)]
pub struct DataRepository {
    pub universe: Vec<Ticker>,
    pub calendar: TradingCalendar,
    pub prices: BTreeMap<String, PriceSeries>,
    pub statements: BTreeMap<String, Vec<StatementRecord>>,
    pub news: Vec<NewsItem>,
    pub macro_snapshots: BTreeMap<Month, MacroSnapshot>,
}

impl DataRepository {
    pub fn ticker(&self, code: &str) -> Option<&Ticker> {
        self.universe.iter().find(|t| t.code == code)
    }

    pub fn sector_of(&self, code: &str) -> Option<&str> {
        self.ticker(code).map(|t| t.sector.as_str())
    }

    /// Open price on an exact date; the execution-price lookup.
    pub fn open_on(&self, code: &str, date: NaiveDate) -> Option<f64> {
        let series = self.prices.get(code)?;
        series.index_of(date).map(|i| series.bars[i].open)
    }
}

/// Point-in-time view: no price bar, statement publication, news item, or
/// macro snapshot later than the decision cutoff.
#[derive(Debug, Clone)]
pub struct DataView {
    pub decision_date: NaiveDate,
    pub universe: Vec<Ticker>,
    pub calendar: TradingCalendar,
    pub prices: BTreeMap<String, PriceSeries>,
    pub statements: BTreeMap<String, Vec<StatementRecord>>,
    pub news: Vec<NewsItem>,
    pub macro_snapshots: BTreeMap<Month, MacroSnapshot>,
}

impl DataView {
    /// The decision month (the view's information horizon).
    pub fn month(&self) -> Month {
        Month::from_date(self.decision_date)
    }

    /// News tagged to `code` and dated within the decision month.
    pub fn news_for_month(&self, code: &str) -> Vec<&NewsItem> {
        let month = self.month();
        self.news
            .iter()
            .filter(|n| {
                Month::from_date(n.date) == month && n.ticker_matches.iter().any(|t| t == code)
            })
            .collect()
    }

    /// Latest macro snapshot with `as_of` at or before the decision month.
    pub fn latest_macro(&self) -> Option<&MacroSnapshot> {
        self.macro_snapshots
            .range(..=self.month())
            .next_back()
            .map(|(_, s)| s)
    }

    /// Latest statement (by period end, then publish date) for `code`.
    pub fn latest_statement(&self, code: &str) -> Option<&StatementRecord> {
        self.statements
            .get(code)?
            .iter()
            .max_by_key(|s| (s.period_end, s.publish_date))
    }
}

/// Everything dated after `decision_date` is dropped: price bars by bar
/// date, statements by publish date, news by item date, and macro snapshots
/// by month.
pub fn slice_asof(repo: &DataRepository, decision_date: NaiveDate) -> DataView {
    let month = Month::from_date(decision_date);
    let prices = repo
        .prices
        .iter()
        .map(|(code, series)| {
            let end = series
                .index_on_or_before(decision_date)
                .map(|i| i + 1)
                .unwrap_or(0);
            (
                code.clone(),
                PriceSeries {
                    ticker: series.ticker.clone(),
                    bars: series.bars[..end].to_vec(),
                },
            )
        })
        .collect();
    let statements = repo
        .statements
        .iter()
        .map(|(code, records)| {
            (
                code.clone(),
                records
                    .iter()
                    .filter(|r| r.publish_date <= decision_date)
                    .cloned()
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let news = repo
        .news
        .iter()
        .filter(|n| n.date <= decision_date)
        .cloned()
        .collect();
    let macro_snapshots = repo
        .macro_snapshots
        .range(..=month)
        .map(|(m, s)| (*m, s.clone()))
        .collect();
    DataView {
        decision_date,
        universe: repo.universe.clone(),
        calendar: repo.calendar.truncated(decision_date),
        prices,
        statements,
        news,
        macro_snapshots,
    }
}

//! Deterministic synthetic fixtures for tests and demos.
//!
//! Everything here is seeded: the same [`FixtureSpec`] always yields the
//! same repository, byte for byte once saved. Generated text deliberately
//! contains no date-like strings so the leakage audit only sees dates the
//! pipeline itself rendered.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::data::{
    DataRepository, LineItems, MacroIndicator, MacroSnapshot, NewsItem, PeriodType, PriceBar,
    PriceSeries, StatementRecord, StatementTexts, Ticker, TradingCalendar, MACRO_INDICATORS,
};
use crate::time::Month;

const SECTORS: [&str; 4] = ["Autos", "Banks", "Chemicals", "Electronics"];

const HEADLINE_BANK: [&str; 6] = [
    "Product line expansion announced",
    "Supply agreement signed with overseas partner",
    "Cost reduction program on track",
    "New plant investment under review",
    "Management reiterates full-year guidance",
    "Share buyback program extended",
];

const SUMMARY_BANK: [&str; 4] = [
    "The company outlined next steps at a press briefing.",
    "Analysts expect a modest impact on near-term earnings.",
    "Details will be disclosed in the upcoming report.",
    "The announcement follows several quarters of preparation.",
];

/// Shape of a synthetic fixture set.
#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub n_tickers: usize,
    /// First month with price bars.
    pub price_start: Month,
    /// Last month with price bars (inclusive).
    pub price_end: Month,
    /// Years of statement history ending near `price_end`.
    pub statement_years: u32,
    pub seed: u64,
}

impl FixtureSpec {
    /// 3 tickers, two years of prices ending 2023-12, four years of
    /// statements. Enough history for every indicator and TTM window at a
    /// late-2023 decision date.
    pub fn small() -> Self {
        Self {
            n_tickers: 3,
            price_start: Month::new(2022, 1),
            price_end: Month::new(2023, 12),
            statement_years: 4,
            seed: 7,
        }
    }

    /// A desk-scale fixture: `n` tickers with prices covering
    /// 2022-01 .. 2024-11, supporting a 12-month backtest window over 2023-10
    /// .. 2024-09 with full indicator history.
    pub fn desk(n_tickers: usize, seed: u64) -> Self {
        Self {
            n_tickers,
            price_start: Month::new(2022, 1),
            price_end: Month::new(2024, 11),
            statement_years: 5,
            seed,
        }
    }
}

/// Mon-Fri business days covering `from..=to`.
pub fn weekday_calendar(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    let mut days = Vec::new();
    let mut d = from;
    while d <= to {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            days.push(d);
        }
        d = d.succ_opt().expect("date range");
    }
    days
}

/// Build the synthetic repository described by `spec`.
pub fn synthetic_repository(spec: &FixtureSpec) -> DataRepository {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let universe: Vec<Ticker> = (0..spec.n_tickers)
        .map(|i| Ticker {
            code: format!("{}", 1001 + i),
            sector: SECTORS[i % SECTORS.len()].to_string(),
        })
        .collect();

    let days = weekday_calendar(spec.price_start.first_day(), spec.price_end.last_day());
    let calendar = TradingCalendar::from_dates(days.iter().copied());

    let ret_dist = Normal::new(0.0003f64, 0.015).expect("valid normal");
    let gap_dist = Normal::new(0.0f64, 0.004).expect("valid normal");
    let mut prices = std::collections::BTreeMap::new();
    for ticker in &universe {
        let mut close = 800.0 + rng.random::<f64>() * 4000.0;
        let mut bars = Vec::with_capacity(days.len());
        for &date in &days {
            let open = close * (1.0 + gap_dist.sample(&mut rng));
            close *= 1.0 + ret_dist.sample(&mut rng);
            bars.push(PriceBar {
                date,
                open: open.max(1.0),
                close: close.max(1.0),
            });
        }
        prices.insert(ticker.code.clone(), bars);
    }

    let mut statements = std::collections::BTreeMap::new();
    for (i, ticker) in universe.iter().enumerate() {
        // One ticker per fixture reports semi-annually to exercise the mixed
        // TTM coverage path.
        let period_type = if i == 1 && spec.n_tickers > 2 {
            PeriodType::SemiAnnual
        } else {
            PeriodType::Quarterly
        };
        statements.insert(
            ticker.code.clone(),
            synthetic_statements(&mut rng, ticker, spec, period_type),
        );
    }

    let mut news = Vec::new();
    for month in spec.price_start.through(spec.price_end) {
        for ticker in &universe {
            if rng.random::<f64>() < 0.6 {
                let day = 1 + (rng.random::<u32>() % 25);
                let date =
                    NaiveDate::from_ymd_opt(month.year(), month.month(), day).expect("valid day");
                news.push(NewsItem {
                    ticker_matches: vec![ticker.code.clone()],
                    date,
                    headline: HEADLINE_BANK[rng.random_range(0..HEADLINE_BANK.len())].to_string(),
                    summary: SUMMARY_BANK[rng.random_range(0..SUMMARY_BANK.len())].to_string(),
                });
            }
        }
    }
    news.sort_by_key(|n| n.date);

    let mut macro_snapshots = std::collections::BTreeMap::new();
    let mut levels: Vec<f64> = MACRO_INDICATORS
        .iter()
        .enumerate()
        .map(|(i, _)| 10.0 + 40.0 * (i as f64 + 1.0))
        .collect();
    let mut prev: Option<Vec<f64>> = None;
    for month in spec.price_start.through(spec.price_end) {
        let mut indicators = std::collections::BTreeMap::new();
        for (i, name) in MACRO_INDICATORS.iter().enumerate() {
            levels[i] *= 1.0 + 0.02 * (rng.random::<f64>() - 0.5);
            let mom_roc = prev.as_ref().map(|p| 100.0 * (levels[i] / p[i] - 1.0));
            indicators.insert(
                name.to_string(),
                MacroIndicator {
                    level: levels[i],
                    mom_roc,
                },
            );
        }
        prev = Some(levels.clone());
        macro_snapshots.insert(
            month,
            MacroSnapshot {
                as_of: month,
                indicators,
            },
        );
    }

    DataRepository {
        universe: universe.clone(),
        calendar,
        prices: prices
            .into_iter()
            .map(|(code, bars)| {
                let ticker = universe.iter().find(|t| t.code == code).unwrap().clone();
                (code, PriceSeries { ticker, bars })
            })
            .collect(),
        statements,
        news,
        macro_snapshots,
    }
}

fn synthetic_statements(
    rng: &mut ChaCha8Rng,
    ticker: &Ticker,
    spec: &FixtureSpec,
    period_type: PeriodType,
) -> Vec<StatementRecord> {
    let step = period_type.months();
    let mut records = Vec::new();
    // Fiscal periods end on Mar/Jun/Sep/Dec month ends.
    let last_end = {
        let m = spec.price_end;
        let offset = m.month() % 3;
        m.add_months(-(offset as i32))
    };
    let n_periods = (spec.statement_years * 12) / step;
    let base_sales = 2.0e10 + rng.random::<f64>() * 8.0e10;
    for k in (0..n_periods).rev() {
        let end_month = last_end.add_months(-((k * step) as i32));
        let period_end = end_month.last_day();
        let publish_offset = 35 + (rng.random::<u32>() % 20) as i64;
        let publish_date = period_end + chrono::Duration::days(publish_offset);
        let growth = 1.0 + 0.01 * (n_periods - k) as f64 + 0.05 * (rng.random::<f64>() - 0.5);
        let sales = base_sales * (step as f64 / 12.0) * growth;
        let margin = 0.06 + 0.04 * rng.random::<f64>();
        let net_income = sales * margin;
        let total_assets = base_sales * (1.2 + 0.2 * rng.random::<f64>());
        let equity = total_assets * (0.35 + 0.2 * rng.random::<f64>());
        let shares = 1.0e8;
        records.push(StatementRecord {
            ticker: ticker.code.clone(),
            period_type,
            period_end,
            publish_date,
            items: LineItems {
                sales: Some(sales),
                cost_of_sales: Some(sales * 0.62),
                operating_profit: Some(sales * (margin + 0.03)),
                net_income: Some(net_income),
                depreciation: Some(sales * 0.05),
                total_assets: Some(total_assets),
                equity: Some(equity),
                cash: Some(total_assets * 0.15),
                receivables: Some(total_assets * 0.1),
                financial_assets: Some(total_assets * 0.05),
                inventory: Some(total_assets * 0.08),
                current_liabilities: Some(total_assets * 0.2),
                interest_bearing_debt: Some(total_assets * 0.25),
                operating_cf: Some(net_income * 1.3),
                investing_cf: Some(-net_income * 0.6),
                eps: Some(net_income / shares),
                dividends_per_share: Some(net_income / shares * 0.3),
                issued_shares: Some(shares),
            },
            texts: StatementTexts {
                business_overview: Some(format!(
                    "Core operations in the {} segment remain the principal earnings driver.",
                    ticker.sector
                )),
                business_risks: Some(
                    "Raw material costs and foreign exchange swings remain the main exposures."
                        .to_string(),
                ),
                mdna: Some(
                    "Management attributes the period's result to steady volume and pricing."
                        .to_string(),
                ),
                governance: Some(
                    "The board includes outside directors and meets on a regular cycle."
                        .to_string(),
                ),
            },
        });
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_deterministic() {
        let a = synthetic_repository(&FixtureSpec::small());
        let b = synthetic_repository(&FixtureSpec::small());
        assert_eq!(a.universe, b.universe);
        for (code, series) in &a.prices {
            assert_eq!(series.bars, b.prices[code].bars);
        }
        assert_eq!(a.news, b.news);
        assert_eq!(a.macro_snapshots, b.macro_snapshots);
    }

    #[test]
    fn fixture_satisfies_basic_invariants() {
        let repo = synthetic_repository(&FixtureSpec::small());
        assert_eq!(repo.universe.len(), 3);
        for series in repo.prices.values() {
            for bar in &series.bars {
                assert!(bar.open > 0.0 && bar.close > 0.0);
            }
            for pair in series.bars.windows(2) {
                assert!(pair[0].date < pair[1].date);
            }
        }
        for records in repo.statements.values() {
            for r in records {
                assert!(r.publish_date >= r.period_end);
            }
        }
        // Statement text must stay free of ISO dates for the leakage audit.
        for records in repo.statements.values() {
            for r in records {
                for text in [
                    r.texts.business_overview.as_deref(),
                    r.texts.business_risks.as_deref(),
                    r.texts.mdna.as_deref(),
                    r.texts.governance.as_deref(),
                ]
                .into_iter()
                .flatten()
                {
                    assert!(!text.chars().any(|c| c.is_ascii_digit()));
                }
            }
        }
        for item in &repo.news {
            assert!(!item.headline.chars().any(|c| c.is_ascii_digit()));
            assert!(!item.summary.chars().any(|c| c.is_ascii_digit()));
        }
    }
}

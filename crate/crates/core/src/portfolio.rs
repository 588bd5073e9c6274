//! Market-neutral portfolio construction and the monthly backtest loop.
//!
//! Books are dollar-neutral unit long-short: the long leg sums to +1 and
//! the short leg to -1 (each name at +-2/N), so gross exposure is 2.
//! Holding-period returns are open-to-open between consecutive execution
//! dates, and the traded notional `sum |dw|` at each rebalance is the base
//! the one-way cost rate applies to.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{slice_asof, DataRepository, DataView, RebalancePair};
use crate::num;
use crate::time::Month;

#[derive(Debug, Error)]
pub enum PortfolioError {
    #[error("portfolio size must be even, got {0}")]
    OddSize(usize),
    #[error("need at least {needed} scored tickers, got {got}")]
    InsufficientScores { needed: usize, got: usize },
    #[error("missing open price for {ticker} on {date}")]
    MissingOpen { ticker: String, date: NaiveDate },
    #[error("sharpe needs at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("zero return variance")]
    ZeroVariance,
    #[error("no business day after {month} to close the final holding period")]
    NoExitDate { month: Month },
    #[error("score provider failed for {month}: {message}")]
    ProviderFailed { month: Month, message: String },
}

/// Signed stock weights for one month. Exactly N/2 longs at +2/N and N/2
/// shorts at -2/N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioWeights {
    pub month: Month,
    pub weights: BTreeMap<String, f64>,
}

impl PortfolioWeights {
    pub fn gross_exposure(&self) -> f64 {
        self.weights.values().map(|w| w.abs()).sum()
    }

    pub fn net_exposure(&self) -> f64 {
        self.weights.values().sum()
    }
}

/// Top N/2 by score long, bottom N/2 short. Ties break by ascending ticker
/// code over a single descending ranking, so the book is deterministic.
pub fn construct(
    scores: &BTreeMap<String, f64>,
    n: usize,
    month: Month,
) -> Result<PortfolioWeights, PortfolioError> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(PortfolioError::OddSize(n));
    }
    if scores.len() < n {
        return Err(PortfolioError::InsufficientScores {
            needed: n,
            got: scores.len(),
        });
    }
    let mut ranked: Vec<(&String, f64)> = scores.iter().map(|(t, s)| (t, *s)).collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("scores must not be NaN")
            .then_with(|| a.0.cmp(b.0))
    });
    let half = n / 2;
    let leg = 2.0 / n as f64;
    let mut weights = BTreeMap::new();
    for (ticker, _) in &ranked[..half] {
        weights.insert((*ticker).clone(), leg);
    }
    for (ticker, _) in &ranked[ranked.len() - half..] {
        weights.insert((*ticker).clone(), -leg);
    }
    Ok(PortfolioWeights { month, weights })
}

/// Open-to-open holding-period return of `weights` between the two
/// execution dates.
pub fn month_return(
    weights: &PortfolioWeights,
    repo: &DataRepository,
    execution_date: NaiveDate,
    next_execution_date: NaiveDate,
) -> Result<f64, PortfolioError> {
    let mut total = 0.0;
    for (ticker, w) in &weights.weights {
        let entry =
            repo.open_on(ticker, execution_date)
                .ok_or_else(|| PortfolioError::MissingOpen {
                    ticker: ticker.clone(),
                    date: execution_date,
                })?;
        let exit = repo.open_on(ticker, next_execution_date).ok_or_else(|| {
            PortfolioError::MissingOpen {
                ticker: ticker.clone(),
                date: next_execution_date,
            }
        })?;
        total += w * (exit / entry - 1.0);
    }
    Ok(total)
}

/// Turnover `sum |w_next - w_prev|`, with an all-zero book at inception:
/// the total traded notional of the rebalance, the base the one-way cost
/// rate applies to. Putting on a gross-2 book costs 2 units of turnover; a
/// full long/short swap at N=2 costs 4.
pub fn turnover(prev: Option<&PortfolioWeights>, next: &PortfolioWeights) -> f64 {
    let mut tickers: std::collections::BTreeSet<&String> = next.weights.keys().collect();
    if let Some(prev) = prev {
        tickers.extend(prev.weights.keys());
    }
    let mut sum = 0.0;
    for ticker in tickers {
        let a = prev
            .and_then(|p| p.weights.get(ticker))
            .copied()
            .unwrap_or(0.0);
        let b = next.weights.get(ticker).copied().unwrap_or(0.0);
        sum += (b - a).abs();
    }
    sum
}

/// One held month of a backtest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthRecord {
    /// The month over which the book was held (the execution month).
    pub month: Month,
    pub decision_date: NaiveDate,
    pub execution_date: NaiveDate,
    pub gross_return: f64,
    pub net_return: f64,
    pub turnover: f64,
    pub weights: BTreeMap<String, f64>,
}

/// Echo of the configuration that produced a [`BacktestResult`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub granularity: Option<String>,
    #[serde(default)]
    pub mask: Vec<String>,
    #[serde(default)]
    pub trials: u32,
    pub cost_bps: f64,
}

/// Monthly return series plus per-month books and turnover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub config: ConfigEcho,
    pub months: Vec<MonthRecord>,
}

impl BacktestResult {
    pub fn gross_returns(&self) -> Vec<f64> {
        self.months.iter().map(|m| m.gross_return).collect()
    }

    pub fn net_returns(&self) -> Vec<f64> {
        self.months.iter().map(|m| m.net_return).collect()
    }

    /// Monthly Sharpe of the net return series.
    pub fn net_sharpe(&self) -> Result<f64, PortfolioError> {
        sharpe(&self.net_returns())
    }

    /// CSV of the monthly return series (month, gross, net, turnover).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("month,gross_return,net_return,turnover\n");
        for m in &self.months {
            out.push_str(&format!(
                "{},{},{},{}\n",
                m.month, m.gross_return, m.net_return, m.turnover
            ));
        }
        out
    }
}

/// Per-month score source for [`run_backtest`]. Implemented for closures.
pub trait ScoreProvider {
    /// Scores for the decision month of `view`. Tickers without a score are
    /// excluded from ranking.
    fn scores(
        &mut self,
        view: &DataView,
        decision_month: Month,
    ) -> Result<BTreeMap<String, f64>, String>;
}

impl<F> ScoreProvider for F
where
    F: FnMut(&DataView, Month) -> Result<BTreeMap<String, f64>, String>,
{
    fn scores(
        &mut self,
        view: &DataView,
        decision_month: Month,
    ) -> Result<BTreeMap<String, f64>, String> {
        self(view, decision_month)
    }
}

/// Run the monthly loop: slice as of each decision date, score, construct,
/// hold open-to-open, and net out `cost_bps * 1e-4 * turnover` per
/// rebalance (inception included).
pub fn run_backtest(
    repo: &DataRepository,
    schedule: &[RebalancePair],
    provider: &mut dyn ScoreProvider,
    n: usize,
    cost_bps: f64,
) -> Result<BacktestResult, PortfolioError> {
    let cost_rate = cost_bps * 1e-4;
    let mut months = Vec::with_capacity(schedule.len());
    let mut prev_book: Option<PortfolioWeights> = None;
    for (i, pair) in schedule.iter().enumerate() {
        let view = slice_asof(repo, pair.decision_date);
        let decision_month = pair.decision_month();
        let scores = provider.scores(&view, decision_month).map_err(|message| {
            PortfolioError::ProviderFailed {
                month: decision_month,
                message,
            }
        })?;
        let holding_month = pair.holding_month();
        let book = construct(&scores, n, holding_month)?;
        let exit_date = match schedule.get(i + 1) {
            Some(next) => next.execution_date,
            None => repo
                .calendar
                .first_business_day(holding_month.next())
                .ok_or(PortfolioError::NoExitDate {
                    month: holding_month,
                })?,
        };
        let gross = month_return(&book, repo, pair.execution_date, exit_date)?;
        let to = turnover(prev_book.as_ref(), &book);
        let net = gross - cost_rate * to;
        months.push(MonthRecord {
            month: holding_month,
            decision_date: pair.decision_date,
            execution_date: pair.execution_date,
            gross_return: gross,
            net_return: net,
            turnover: to,
            weights: book.weights.clone(),
        });
        prev_book = Some(book);
    }
    Ok(BacktestResult {
        config: ConfigEcho {
            n,
            cost_bps,
            ..ConfigEcho::default()
        },
        months,
    })
}

fn all_equal(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Monthly Sharpe ratio: mean over sample standard deviation (n-1), with a
/// zero risk-free rate. A constant series is zero variance regardless of
/// floating-point residue in the mean.
pub fn sharpe(monthly_returns: &[f64]) -> Result<f64, PortfolioError> {
    if monthly_returns.len() < 2 {
        return Err(PortfolioError::TooFewObservations(monthly_returns.len()));
    }
    if all_equal(monthly_returns) {
        return Err(PortfolioError::ZeroVariance);
    }
    let mean = num::mean(monthly_returns).expect("non-empty");
    let std = num::sample_std(monthly_returns).expect("len >= 2");
    if std == 0.0 {
        return Err(PortfolioError::ZeroVariance);
    }
    Ok(mean / std)
}

/// Annualized statistics. The Sharpe component is absent when the series
/// has zero volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnualStats {
    pub ann_return: f64,
    pub ann_vol: f64,
    pub ann_sharpe: Option<f64>,
}

/// Geometric annualized return, sqrt(12)-scaled volatility, and their
/// ratio.
pub fn annualize(monthly_returns: &[f64]) -> Result<AnnualStats, PortfolioError> {
    if monthly_returns.len() < 2 {
        return Err(PortfolioError::TooFewObservations(monthly_returns.len()));
    }
    let n = monthly_returns.len() as f64;
    let compounded: f64 = monthly_returns.iter().map(|r| 1.0 + r).product();
    let ann_return = compounded.powf(12.0 / n) - 1.0;
    let ann_vol = if all_equal(monthly_returns) {
        0.0
    } else {
        num::sample_std(monthly_returns).expect("len >= 2") * 12f64.sqrt()
    };
    let ann_sharpe = (ann_vol > 0.0).then(|| ann_return / ann_vol);
    Ok(AnnualStats {
        ann_return,
        ann_vol,
        ann_sharpe,
    })
}

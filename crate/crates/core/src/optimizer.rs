//! Equal-risk-contribution composite over the agent strategies, and the
//! index blend sweep.
//!
//! Strategy-level covariance comes from the stock level: with `P` the
//! strategies-by-stocks weight matrix and `V` the stock covariance, the
//! strategy covariance is `PVP'`. The ERC weights equalize each strategy's
//! contribution `w_i (Sigma w)_i / sqrt(w' Sigma w)` to composite risk,
//! long-only on the simplex.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::portfolio::{AnnualStats, PortfolioWeights};
use crate::time::Month;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("covariance window too short: {got} < {min}")]
    WindowTooShort { got: usize, min: usize },
    #[error("return series length mismatch for {ticker}: {got} vs {expected}")]
    SeriesLengthMismatch {
        ticker: String,
        got: usize,
        expected: usize,
    },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: panel has {panel} stocks, covariance has {cov}")]
    DimensionMismatch { panel: usize, cov: usize },
    #[error("covariance is not positive semi-definite (min eigenvalue {0})")]
    NotPsd(f64),
    #[error("strategy {0} has zero variance (degenerate covariance diagonal)")]
    ZeroDiagonal(String),
    #[error("missing monthly return for {ticker} in {month}")]
    MissingReturn { ticker: String, month: Month },
    #[error("panel months disagree: {0} vs {1}")]
    PanelMonthMismatch(Month, Month),
    #[error("aligned series required: index has {index} months, composite {composite}")]
    MisalignedSeries { index: usize, composite: usize },
}

/// Sample covariance of per-stock monthly return series.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub tickers: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub window_months: usize,
}

/// Sample covariance (n-1 denominator) over aligned series, symmetrized by
/// averaging with its transpose.
pub fn stock_covariance(
    returns: &BTreeMap<String, Vec<f64>>,
) -> Result<CovarianceEstimate, OptimizerError> {
    let tickers: Vec<String> = returns.keys().cloned().collect();
    let t = returns.values().next().map(|v| v.len()).unwrap_or(0);
    if t < 2 {
        return Err(OptimizerError::WindowTooShort { got: t, min: 2 });
    }
    for (ticker, series) in returns {
        if series.len() != t {
            return Err(OptimizerError::SeriesLengthMismatch {
                ticker: ticker.clone(),
                got: series.len(),
                expected: t,
            });
        }
    }
    let n = tickers.len();
    let means: Vec<f64> = tickers
        .iter()
        .map(|k| returns[k].iter().sum::<f64>() / t as f64)
        .collect();
    let mut matrix = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let (a, b) = (&returns[&tickers[i]], &returns[&tickers[j]]);
            let cov = (0..t)
                .map(|k| (a[k] - means[i]) * (b[k] - means[j]))
                .sum::<f64>()
                / (t - 1) as f64;
            matrix[(i, j)] = cov;
            matrix[(j, i)] = cov;
        }
    }
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(CovarianceEstimate {
        tickers,
        matrix,
        window_months: t,
    })
}

/// Per-strategy stock weight rows at a common month.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyPanel {
    pub labels: Vec<String>,
    pub tickers: Vec<String>,
    /// strategies x stocks.
    pub weights: DMatrix<f64>,
    pub month: Month,
}

impl StrategyPanel {
    /// Assemble from labeled books; every book must be for the same month.
    /// Stocks a book does not hold get weight zero.
    pub fn from_books(
        books: &[(String, &PortfolioWeights)],
        tickers: &[String],
    ) -> Result<Self, OptimizerError> {
        assert!(!books.is_empty(), "panel needs at least one strategy");
        let month = books[0].1.month;
        for (_, b) in books {
            if b.month != month {
                return Err(OptimizerError::PanelMonthMismatch(month, b.month));
            }
        }
        let mut weights = DMatrix::zeros(books.len(), tickers.len());
        for (row, (_, book)) in books.iter().enumerate() {
            for (col, ticker) in tickers.iter().enumerate() {
                if let Some(w) = book.weights.get(ticker) {
                    weights[(row, col)] = *w;
                }
            }
        }
        Ok(Self {
            labels: books.iter().map(|(l, _)| l.clone()).collect(),
            tickers: tickers.to_vec(),
            weights,
            month,
        })
    }
}

/// `Sigma = P V P'`, symmetrized.
pub fn strategy_covariance(
    panel: &StrategyPanel,
    cov: &CovarianceEstimate,
) -> Result<DMatrix<f64>, OptimizerError> {
    if panel.tickers.len() != cov.tickers.len() || panel.tickers != cov.tickers {
        return Err(OptimizerError::DimensionMismatch {
            panel: panel.tickers.len(),
            cov: cov.tickers.len(),
        });
    }
    let sigma = &panel.weights * &cov.matrix * panel.weights.transpose();
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// Converged ERC weights with their verified risk contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErcSolution {
    pub weights: Vec<f64>,
    pub risk_contributions: Vec<f64>,
    pub iterations: usize,
    /// Max pairwise relative spread `|RC_i/RC_j - 1|` at the solution.
    pub residual: f64,
}

/// Risk contributions `w_i (Sigma w)_i / sqrt(w' Sigma w)` of `w`.
pub fn risk_contributions(sigma: &DMatrix<f64>, weights: &[f64]) -> Vec<f64> {
    let w = DVector::from_column_slice(weights);
    let sw = sigma * &w;
    let total = (w.dot(&sw)).sqrt();
    weights
        .iter()
        .zip(sw.iter())
        .map(|(wi, swi)| wi * swi / total)
        .collect()
}

fn max_rc_ratio_spread(rc: &[f64]) -> f64 {
    let mut spread: f64 = 0.0;
    for i in 0..rc.len() {
        for j in 0..rc.len() {
            if rc[j] != 0.0 {
                spread = spread.max((rc[i] / rc[j] - 1.0).abs());
            } else {
                spread = f64::INFINITY;
            }
        }
    }
    spread
}

const ERC_TOLERANCE: f64 = 1e-9;
const ERC_MAX_ITERATIONS: usize = 10_000;

/// Solve for long-only simplex weights with equal risk contributions via
/// cyclical coordinate descent on `x' Sigma x / 2 - sum_i ln(x_i) / M`; the
/// stationary point has equal contributions and the simplex constraint is a
/// final renormalization.
pub fn erc_weights(sigma: &DMatrix<f64>) -> Result<ErcSolution, OptimizerError> {
    if sigma.nrows() != sigma.ncols() {
        return Err(OptimizerError::NotSquare {
            rows: sigma.nrows(),
            cols: sigma.ncols(),
        });
    }
    let m = sigma.nrows();
    assert!(m >= 1, "empty covariance");
    let scale = sigma.diagonal().amax();
    for i in 0..m {
        if sigma[(i, i)] <= 0.0 || sigma[(i, i)] < scale * 1e-14 {
            return Err(OptimizerError::ZeroDiagonal(format!("#{i}")));
        }
    }
    let sym = (sigma + sigma.transpose()) * 0.5;
    let eigen = sym.clone().symmetric_eigen();
    let min_eig = eigen.eigenvalues.min();
    if min_eig < -1e-10 * scale.max(1.0) {
        return Err(OptimizerError::NotPsd(min_eig));
    }

    let b = 1.0 / m as f64;
    let mut x: Vec<f64> = (0..m).map(|i| b / sym[(i, i)].sqrt()).collect();
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < ERC_MAX_ITERATIONS {
        iterations += 1;
        for i in 0..m {
            let mut cross = 0.0;
            for j in 0..m {
                if j != i {
                    cross += sym[(i, j)] * x[j];
                }
            }
            let dii = sym[(i, i)];
            x[i] = (-cross + (cross * cross + 4.0 * dii * b).sqrt()) / (2.0 * dii);
        }
        let total: f64 = x.iter().sum();
        let w: Vec<f64> = x.iter().map(|v| v / total).collect();
        let rc = risk_contributions(&sym, &w);
        residual = max_rc_ratio_spread(&rc);
        if residual <= ERC_TOLERANCE {
            break;
        }
    }
    let total: f64 = x.iter().sum();
    let weights: Vec<f64> = x.iter().map(|v| v / total).collect();
    let risk = risk_contributions(&sym, &weights);
    Ok(ErcSolution {
        weights,
        risk_contributions: risk,
        iterations,
        residual,
    })
}

/// One month of the ERC composite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositePoint {
    pub month: Month,
    pub gross_return: f64,
    /// Traded notional of the blended stock book at this rebalance.
    pub turnover: f64,
    pub erc: ErcSolution,
    /// Blended per-stock weights `w' P`.
    pub stock_weights: BTreeMap<String, f64>,
}

/// Recompute ERC weights each month from the expanding window of realized
/// stock returns strictly before that month (leakage-safe), and apply them
/// to the strategies' realized returns.
///
/// `stock_returns` holds each holding month's open-to-open stock returns.
/// Months with fewer than `min_window` months of prior history are skipped
/// as warm-up.
pub fn composite_returns(
    panels: &BTreeMap<Month, StrategyPanel>,
    stock_returns: &BTreeMap<Month, BTreeMap<String, f64>>,
    min_window: usize,
) -> Result<Vec<CompositePoint>, OptimizerError> {
    let mut out = Vec::new();
    let mut prev_stock_weights: Option<BTreeMap<String, f64>> = None;
    for (month, panel) in panels {
        let history: Vec<(&Month, &BTreeMap<String, f64>)> = stock_returns.range(..month).collect();
        if history.len() < min_window {
            continue;
        }
        let mut aligned: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for ticker in &panel.tickers {
            let mut series = Vec::with_capacity(history.len());
            for (hist_month, row) in &history {
                let r = row
                    .get(ticker)
                    .copied()
                    .ok_or_else(|| OptimizerError::MissingReturn {
                        ticker: ticker.clone(),
                        month: **hist_month,
                    })?;
                series.push(r);
            }
            aligned.insert(ticker.clone(), series);
        }
        let cov = stock_covariance(&aligned)?;
        let sigma = strategy_covariance(panel, &cov)?;
        let erc = erc_weights(&sigma).map_err(|e| match e {
            OptimizerError::ZeroDiagonal(idx) => {
                let i: usize = idx.trim_start_matches('#').parse().unwrap_or(0);
                OptimizerError::ZeroDiagonal(panel.labels.get(i).cloned().unwrap_or(idx))
            }
            other => other,
        })?;

        let this_month = stock_returns
            .get(month)
            .ok_or(OptimizerError::MissingReturn {
                ticker: "*".into(),
                month: *month,
            })?;
        let mut gross = 0.0;
        for (k, composite_weight) in erc.weights.iter().enumerate() {
            let mut strat_return = 0.0;
            for (col, ticker) in panel.tickers.iter().enumerate() {
                let w = panel.weights[(k, col)];
                if w != 0.0 {
                    let r = this_month.get(ticker).copied().ok_or_else(|| {
                        OptimizerError::MissingReturn {
                            ticker: ticker.clone(),
                            month: *month,
                        }
                    })?;
                    strat_return += w * r;
                }
            }
            gross += composite_weight * strat_return;
        }

        let mut stock_weights = BTreeMap::new();
        for (col, ticker) in panel.tickers.iter().enumerate() {
            let mut q = 0.0;
            for (k, wk) in erc.weights.iter().enumerate() {
                q += wk * panel.weights[(k, col)];
            }
            if q != 0.0 {
                stock_weights.insert(ticker.clone(), q);
            }
        }
        let turnover = {
            let mut tickers: std::collections::BTreeSet<&String> = stock_weights.keys().collect();
            if let Some(prev) = &prev_stock_weights {
                tickers.extend(prev.keys());
            }
            tickers
                .into_iter()
                .map(|t| {
                    let a = prev_stock_weights
                        .as_ref()
                        .and_then(|p| p.get(t))
                        .copied()
                        .unwrap_or(0.0);
                    let b = stock_weights.get(t).copied().unwrap_or(0.0);
                    (b - a).abs()
                })
                .sum()
        };
        prev_stock_weights = Some(stock_weights.clone());
        out.push(CompositePoint {
            month: *month,
            gross_return: gross,
            turnover,
            erc,
            stock_weights,
        });
    }
    Ok(out)
}

/// One allocation step of the blend sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendPoint {
    pub allocation: f64,
    pub gross: AnnualStats,
    pub net: AnnualStats,
}

/// Sweep the index/composite allocation from 0% to 100% in 10% steps.
///
/// The index leg is costless; the cost drag applies to the composite leg
/// only, as `cost_bps * 1e-4 * turnover` per month.
pub fn blend_sweep(
    index_returns: &[f64],
    composite_gross: &[f64],
    composite_turnover: &[f64],
    cost_bps: f64,
) -> Result<Vec<BlendPoint>, OptimizerError> {
    if index_returns.len() != composite_gross.len()
        || composite_gross.len() != composite_turnover.len()
    {
        return Err(OptimizerError::MisalignedSeries {
            index: index_returns.len(),
            composite: composite_gross.len(),
        });
    }
    if index_returns.len() < 2 {
        return Err(OptimizerError::WindowTooShort {
            got: index_returns.len(),
            min: 2,
        });
    }
    let cost_rate = cost_bps * 1e-4;
    let composite_net: Vec<f64> = composite_gross
        .iter()
        .zip(composite_turnover)
        .map(|(r, t)| r - cost_rate * t)
        .collect();
    let mut out = Vec::with_capacity(11);
    for step in 0..=10u32 {
        let a = step as f64 / 10.0;
        let gross: Vec<f64> = index_returns
            .iter()
            .zip(composite_gross)
            .map(|(i, c)| (1.0 - a) * i + a * c)
            .collect();
        let net: Vec<f64> = index_returns
            .iter()
            .zip(&composite_net)
            .map(|(i, c)| (1.0 - a) * i + a * c)
            .collect();
        let stats_err = |_| OptimizerError::WindowTooShort { got: 0, min: 2 };
        out.push(BlendPoint {
            allocation: a,
            gross: crate::portfolio::annualize(&gross).map_err(stats_err)?,
            net: crate::portfolio::annualize(&net).map_err(stats_err)?,
        });
    }
    Ok(out)
}

/// CSV rendering of a blend sweep (the curve behind the allocation figure).
pub fn blend_curve_csv(points: &[BlendPoint]) -> String {
    let mut out = String::from(
        "allocation,gross_return,gross_vol,gross_sharpe,net_return,net_vol,net_sharpe\n",
    );
    let s = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.allocation,
            p.gross.ann_return,
            p.gross.ann_vol,
            s(p.gross.ann_sharpe),
            p.net.ann_return,
            p.net.ann_vol,
            s(p.net.ann_sharpe),
        ));
    }
    out
}

/// Gross/net annualized rows for one portfolio of the performance table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRow {
    pub portfolio: String,
    pub gross: AnnualStats,
    pub net: AnnualStats,
}

/// The three-row performance table (index / composite / 50-50); the index
/// is costless so its gross and net rows coincide.
pub fn performance_table(
    index_returns: &[f64],
    composite_gross: &[f64],
    composite_turnover: &[f64],
    cost_bps: f64,
) -> Result<Vec<PerformanceRow>, OptimizerError> {
    let points = blend_sweep(index_returns, composite_gross, composite_turnover, cost_bps)?;
    let pick = |a: f64| {
        points
            .iter()
            .find(|p| (p.allocation - a).abs() < 1e-12)
            .expect("sweep covers 0, 0.5, 1")
            .clone()
    };
    let index = pick(0.0);
    let composite = pick(1.0);
    let blend = pick(0.5);
    Ok(vec![
        PerformanceRow {
            portfolio: "index".into(),
            gross: index.gross,
            net: index.net,
        },
        PerformanceRow {
            portfolio: "composite".into(),
            gross: composite.gross,
            net: composite.net,
        },
        PerformanceRow {
            portfolio: "blend_50_50".into(),
            gross: blend.gross,
            net: blend.net,
        },
    ])
}

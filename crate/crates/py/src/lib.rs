//! Python bindings: the main types and operations of the backtesting
//! engine, for notebook-scale exploration. Build with
//! `cargo build -p tradecrew-py --release` and import the resulting
//! `tradecrew_py` cdylib (see `python/smoke_test.py`).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use tradecrew_core::agents::backend::SyntheticBackend;
use tradecrew_core::agents::pipeline::run_trial;
use tradecrew_core::agents::{AblationMask, AgentRole, Granularity};
use tradecrew_core::analysis;
use tradecrew_core::data;
use tradecrew_core::indicators;
use tradecrew_core::optimizer;
use tradecrew_core::portfolio;
use tradecrew_core::Month;

type TokenZPairs = Vec<(String, f64)>;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_month(s: &str) -> PyResult<Month> {
    Month::from_str(s).map_err(value_err)
}

fn price_series(dates: Vec<String>, closes: Vec<f64>) -> PyResult<data::PriceSeries> {
    if dates.len() != closes.len() {
        return Err(value_err("dates and closes must have equal length"));
    }
    let mut bars = Vec::with_capacity(dates.len());
    for (date, close) in dates.iter().zip(&closes) {
        let date: chrono::NaiveDate = date.parse().map_err(value_err)?;
        bars.push(data::PriceBar {
            date,
            open: *close,
            close: *close,
        });
    }
    Ok(data::PriceSeries {
        ticker: data::Ticker {
            code: "PY".into(),
            sector: "none".into(),
        },
        bars,
    })
}

/// Recursive EMA with alpha = 2 / (span + 1), seeded with the first value.
#[pyfunction]
fn ema(values: Vec<f64>, span: usize) -> PyResult<Vec<f64>> {
    indicators::ema(&values, span).map_err(value_err)
}

/// The fine-grained technical feature set for a close series at `asof`.
#[pyfunction]
fn technical_features(
    dates: Vec<String>,
    closes: Vec<f64>,
    asof: &str,
) -> PyResult<BTreeMap<String, Option<f64>>> {
    let series = price_series(dates, closes)?;
    let asof: chrono::NaiveDate = asof.parse().map_err(value_err)?;
    let f = indicators::fine_features(&series, asof);
    let mut out = BTreeMap::new();
    for (i, n) in indicators::ROC_DAY_HORIZONS.iter().enumerate() {
        out.insert(format!("roc_{n}d"), f.roc_days[i]);
    }
    for (i, m) in indicators::ROC_MONTH_HORIZONS.iter().enumerate() {
        out.insert(format!("roc_{m}m"), f.roc_months[i]);
    }
    out.insert("bollinger_z".into(), f.bollinger_z);
    out.insert("macd".into(), f.macd_norm);
    out.insert("signal".into(), f.signal_norm);
    out.insert("hist".into(), f.hist_norm);
    out.insert("rsi".into(), f.rsi);
    out.insert("pct_k".into(), f.pct_k);
    out.insert("pct_d".into(), f.pct_d);
    out.insert("j".into(), f.j);
    Ok(out)
}

/// Top-N/2 long at +2/N, bottom-N/2 short at -2/N, ties by ticker code.
#[pyfunction]
fn construct_portfolio(scores: BTreeMap<String, f64>, n: usize) -> PyResult<BTreeMap<String, f64>> {
    let book = portfolio::construct(&scores, n, Month::new(2000, 1)).map_err(value_err)?;
    Ok(book.weights)
}

/// Monthly Sharpe: mean over sample standard deviation, risk-free 0.
#[pyfunction]
fn sharpe(returns: Vec<f64>) -> PyResult<f64> {
    portfolio::sharpe(&returns).map_err(value_err)
}

/// (annualized return, annualized vol, annualized Sharpe or None).
#[pyfunction]
fn annualize(returns: Vec<f64>) -> PyResult<(f64, f64, Option<f64>)> {
    let stats = portfolio::annualize(&returns).map_err(value_err)?;
    Ok((stats.ann_return, stats.ann_vol, stats.ann_sharpe))
}

/// Equal-risk-contribution weights for a covariance matrix given as rows.
#[pyfunction]
fn erc_weights(covariance: Vec<Vec<f64>>) -> PyResult<BTreeMap<String, Py<PyAny>>> {
    let m = covariance.len();
    if covariance.iter().any(|row| row.len() != m) {
        return Err(value_err("covariance must be square"));
    }
    let flat: Vec<f64> = covariance.into_iter().flatten().collect();
    let sigma = nalgebra::DMatrix::from_row_slice(m, m, &flat);
    let sol = optimizer::erc_weights(&sigma).map_err(value_err)?;
    Python::attach(|py| {
        let mut out: BTreeMap<String, Py<PyAny>> = BTreeMap::new();
        out.insert(
            "weights".into(),
            sol.weights.into_pyobject(py)?.into_any().unbind(),
        );
        out.insert(
            "risk_contributions".into(),
            sol.risk_contributions
                .into_pyobject(py)?
                .into_any()
                .unbind(),
        );
        out.insert(
            "iterations".into(),
            sol.iterations.into_pyobject(py)?.into_any().unbind(),
        );
        out.insert(
            "residual".into(),
            sol.residual.into_pyobject(py)?.into_any().unbind(),
        );
        Ok(out)
    })
}

/// Two-sided Mann-Whitney U: (U of x, p, stars).
#[pyfunction]
fn mann_whitney_u(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64, String)> {
    let result = analysis::mann_whitney_u(&x, &y).map_err(value_err)?;
    Ok((result.u, result.p, result.stars.as_str().to_string()))
}

/// Top-k tokens per side by log-odds z-score: (side_i, side_j) as
/// (token, z) pairs.
#[pyfunction]
#[pyo3(signature = (counts_i, counts_j, prior_scale=0.01, k=10))]
fn log_odds_top(
    counts_i: BTreeMap<String, u64>,
    counts_j: BTreeMap<String, u64>,
    prior_scale: f64,
    k: usize,
) -> PyResult<(TokenZPairs, TokenZPairs)> {
    let mut ci = analysis::TokenCorpus::new("i");
    for (t, c) in counts_i {
        ci.add_token(t, c);
    }
    let mut cj = analysis::TokenCorpus::new("j");
    for (t, c) in counts_j {
        cj.add_token(t, c);
    }
    let result = analysis::log_odds(&ci, &cj, prior_scale).map_err(value_err)?;
    let top = analysis::top_k(&result, k);
    let pairs = |side: Vec<analysis::TokenStat>| {
        side.into_iter().map(|s| (s.token, s.z)).collect::<Vec<_>>()
    };
    Ok((pairs(top.side_i), pairs(top.side_j)))
}

/// Per-ticker median across trial score maps.
#[pyfunction]
fn median_scores(trials: Vec<BTreeMap<String, f64>>) -> BTreeMap<String, f64> {
    tradecrew_core::agents::pipeline::median_scores(&trials)
}

/// Deterministic offline pseudo-embeddings (unit vectors).
#[pyfunction]
#[pyo3(signature = (texts, seed=0, dim=64))]
fn offline_embed(texts: Vec<String>, seed: u64, dim: usize) -> PyResult<Vec<Vec<f64>>> {
    use tradecrew_core::analysis::EmbeddingBackend;
    let embedder = analysis::OfflineEmbedder { seed, dim };
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    embedder.embed(&refs).map_err(value_err)
}

/// Cosine similarity in [-1, 1].
#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(value_err("vectors must have equal dimensions"));
    }
    Ok(analysis::cosine(&a, &b))
}

/// A loaded fixture repository.
#[pyclass]
struct Repository {
    inner: data::DataRepository,
}

#[pymethods]
impl Repository {
    /// (code, sector) pairs of the universe.
    fn tickers(&self) -> Vec<(String, String)> {
        self.inner
            .universe
            .iter()
            .map(|t| (t.code.clone(), t.sector.clone()))
            .collect()
    }

    fn business_days(&self) -> Vec<String> {
        self.inner
            .calendar
            .business_days()
            .iter()
            .map(|d| d.to_string())
            .collect()
    }

    /// (decision_date, execution_date) pairs for the decision-month window.
    fn rebalance_schedule(
        &self,
        start_month: &str,
        end_month: &str,
    ) -> PyResult<Vec<(String, String)>> {
        let schedule = data::rebalance_schedule(
            &self.inner.calendar,
            parse_month(start_month)?,
            parse_month(end_month)?,
        )
        .map_err(value_err)?;
        Ok(schedule
            .iter()
            .map(|p| (p.decision_date.to_string(), p.execution_date.to_string()))
            .collect())
    }

    /// One scripted (deterministic synthetic) trial over the performance
    /// window, backtested at portfolio size `n`.
    #[pyo3(signature = (start_month, end_month, granularity="fine", mask=Vec::new(), trial=0, n=10, cost_bps=10.0))]
    #[allow(clippy::too_many_arguments)]
    fn scripted_backtest(
        &self,
        start_month: &str,
        end_month: &str,
        granularity: &str,
        mask: Vec<String>,
        trial: u32,
        n: usize,
        cost_bps: f64,
    ) -> PyResult<BTreeMap<String, Py<PyAny>>> {
        let granularity = Granularity::from_str(granularity).map_err(value_err)?;
        let roles: Vec<AgentRole> = mask
            .iter()
            .map(|r| serde_json_role(r))
            .collect::<PyResult<_>>()?;
        let mask = AblationMask::from_roles(&roles).map_err(value_err)?;
        let schedule = data::rebalance_schedule(
            &self.inner.calendar,
            parse_month(start_month)?.prev(),
            parse_month(end_month)?.prev(),
        )
        .map_err(value_err)?;
        let (scores, _store) = run_trial(
            &self.inner,
            &schedule,
            granularity,
            &mask,
            trial,
            &SyntheticBackend,
        )
        .map_err(value_err)?;
        let mut provider = |_view: &data::DataView, month: Month| {
            scores
                .get(&month)
                .cloned()
                .ok_or_else(|| format!("no scores for {month}"))
        };
        let result = portfolio::run_backtest(&self.inner, &schedule, &mut provider, n, cost_bps)
            .map_err(value_err)?;
        Python::attach(|py| {
            let months: Vec<String> = result.months.iter().map(|m| m.month.to_string()).collect();
            let gross: Vec<f64> = result.gross_returns();
            let net: Vec<f64> = result.net_returns();
            let turnover: Vec<f64> = result.months.iter().map(|m| m.turnover).collect();
            let sharpe = portfolio::sharpe(&net).ok();
            let mut out: BTreeMap<String, Py<PyAny>> = BTreeMap::new();
            out.insert(
                "months".into(),
                months.into_pyobject(py)?.into_any().unbind(),
            );
            out.insert(
                "gross_returns".into(),
                gross.into_pyobject(py)?.into_any().unbind(),
            );
            out.insert(
                "net_returns".into(),
                net.into_pyobject(py)?.into_any().unbind(),
            );
            out.insert(
                "turnover".into(),
                turnover.into_pyobject(py)?.into_any().unbind(),
            );
            out.insert(
                "sharpe".into(),
                sharpe.into_pyobject(py)?.into_any().unbind(),
            );
            Ok(out)
        })
    }
}

fn serde_json_role(name: &str) -> PyResult<AgentRole> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| value_err(format!("unknown role {name:?}")))
}

/// Load a fixture tree (see the data-layout docs in the README).
#[pyfunction]
#[pyo3(signature = (root, universe=None))]
fn load_repository(root: PathBuf, universe: Option<PathBuf>) -> PyResult<Repository> {
    let universe = universe.unwrap_or_else(|| root.join("universe.json"));
    let (inner, report) = data::load_repository(&root, &universe).map_err(value_err)?;
    if !report.is_clean() {
        return Err(value_err(format!(
            "{} rejected fixture row(s); run the validate command for details",
            report.rejected.len()
        )));
    }
    Ok(Repository { inner })
}

#[pymodule]
fn tradecrew_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Repository>()?;
    m.add_function(wrap_pyfunction!(load_repository, m)?)?;
    m.add_function(wrap_pyfunction!(ema, m)?)?;
    m.add_function(wrap_pyfunction!(technical_features, m)?)?;
    m.add_function(wrap_pyfunction!(construct_portfolio, m)?)?;
    m.add_function(wrap_pyfunction!(sharpe, m)?)?;
    m.add_function(wrap_pyfunction!(annualize, m)?)?;
    m.add_function(wrap_pyfunction!(erc_weights, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney_u, m)?)?;
    m.add_function(wrap_pyfunction!(log_odds_top, m)?)?;
    m.add_function(wrap_pyfunction!(median_scores, m)?)?;
    m.add_function(wrap_pyfunction!(offline_embed, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    Ok(())
}

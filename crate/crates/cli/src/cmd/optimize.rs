//! `optimize`: build the ERC composite over strategy result directories and
//! sweep the index/composite blend.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Context, Result};

use tradecrew_core::data::load_repository;
use tradecrew_core::optimizer::{
    blend_curve_csv, blend_sweep, composite_returns, performance_table, StrategyPanel,
};
use tradecrew_core::portfolio::{BacktestResult, PortfolioWeights};
use tradecrew_core::Month;

use crate::config::{ConfigError, RunConfig};
use crate::manifest::OutputWriter;

/// Parse `month,return` CSV (header required).
fn load_index_returns(path: &Path) -> Result<BTreeMap<Month, f64>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("month,return") => {}
        other => {
            return Err(anyhow!(ConfigError(format!(
                "{}: expected header `month,return`, got {other:?}",
                path.display()
            ))))
        }
    }
    let mut out = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (month, value) = line
            .split_once(',')
            .ok_or_else(|| anyhow!("{}:{}: expected 2 fields", path.display(), i + 2))?;
        let month: Month = month
            .parse()
            .map_err(|e| anyhow!("{}:{}: {e}", path.display(), i + 2))?;
        let value: f64 = value
            .parse()
            .map_err(|e| anyhow!("{}:{}: bad return: {e}", path.display(), i + 2))?;
        out.insert(month, value);
    }
    Ok(out)
}

fn load_strategy(dir: &Path, n: usize) -> Result<(String, BacktestResult)> {
    let label = dir
        .file_name()
        .and_then(|f| f.to_str())
        .unwrap_or("strategy")
        .to_string();
    let path = dir.join(format!("results/N{n}/median.json"));
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let result: BacktestResult =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok((label, result))
}

pub fn cmd_optimize(
    config: &RunConfig,
    strategy_dirs: &[std::path::PathBuf],
    index_file: &Path,
    n: usize,
    min_window: usize,
    out: &Path,
) -> Result<()> {
    if strategy_dirs.is_empty() {
        return Err(anyhow!(ConfigError(
            "at least one --strategy directory required".into()
        )));
    }
    let (repo, _) = load_repository(&config.data_root, &config.universe_path())?;
    let strategies: Vec<(String, BacktestResult)> = strategy_dirs
        .iter()
        .map(|dir| load_strategy(dir, n))
        .collect::<Result<_>>()?;

    // Common holding months across every strategy.
    let mut common: Option<Vec<Month>> = None;
    for (_, result) in &strategies {
        let months: Vec<Month> = result.months.iter().map(|m| m.month).collect();
        common = Some(match common {
            None => months,
            Some(existing) => existing
                .into_iter()
                .filter(|m| months.contains(m))
                .collect(),
        });
    }
    let months = common.unwrap_or_default();
    if months.len() < min_window + 2 {
        return Err(anyhow!(ConfigError(format!(
            "only {} common months; need at least min_window + 2 = {}",
            months.len(),
            min_window + 2
        ))));
    }

    let tickers: Vec<String> = repo.universe.iter().map(|t| t.code.clone()).collect();
    // Realized open-to-open stock returns per holding month.
    let mut stock_returns: BTreeMap<Month, BTreeMap<String, f64>> = BTreeMap::new();
    for month in &months {
        let entry = repo
            .calendar
            .first_business_day(*month)
            .ok_or_else(|| anyhow!("no business day in {month}"))?;
        let exit = repo
            .calendar
            .first_business_day(month.next())
            .ok_or_else(|| anyhow!("no business day in {}", month.next()))?;
        let mut row = BTreeMap::new();
        for code in &tickers {
            let a = repo
                .open_on(code, entry)
                .ok_or_else(|| anyhow!("missing open for {code} on {entry}"))?;
            let b = repo
                .open_on(code, exit)
                .ok_or_else(|| anyhow!("missing open for {code} on {exit}"))?;
            row.insert(code.clone(), b / a - 1.0);
        }
        stock_returns.insert(*month, row);
    }

    let mut panels: BTreeMap<Month, StrategyPanel> = BTreeMap::new();
    for month in &months {
        let books: Vec<(String, PortfolioWeights)> = strategies
            .iter()
            .map(|(label, result)| {
                let record = result
                    .months
                    .iter()
                    .find(|m| m.month == *month)
                    .expect("common month");
                (
                    label.clone(),
                    PortfolioWeights {
                        month: *month,
                        weights: record.weights.clone(),
                    },
                )
            })
            .collect();
        let refs: Vec<(String, &PortfolioWeights)> =
            books.iter().map(|(l, b)| (l.clone(), b)).collect();
        panels.insert(*month, StrategyPanel::from_books(&refs, &tickers)?);
    }

    let composite = composite_returns(&panels, &stock_returns, min_window)?;
    if composite.is_empty() {
        return Err(anyhow!(
            "composite is empty after the {min_window}-month warm-up"
        ));
    }
    let index_by_month = load_index_returns(index_file)?;
    let mut index = Vec::with_capacity(composite.len());
    for point in &composite {
        let r = index_by_month.get(&point.month).ok_or_else(|| {
            anyhow!(ConfigError(format!(
                "index file lacks month {}",
                point.month
            )))
        })?;
        index.push(*r);
    }
    let gross: Vec<f64> = composite.iter().map(|p| p.gross_return).collect();
    let turnover: Vec<f64> = composite.iter().map(|p| p.turnover).collect();

    let points = blend_sweep(&index, &gross, &turnover, config.cost_bps)?;
    let table = performance_table(&index, &gross, &turnover, config.cost_bps)?;

    let mut writer = OutputWriter::new(out, "optimize")?;
    writer.write("blend_curve.csv", blend_curve_csv(&points))?;
    writer.write_json("table4.json", &serde_json::json!({ "rows": table }))?;
    writer.write_json("composite.json", &composite)?;
    writer.finish()?;
    println!(
        "optimize: {} strategies, {} composite months, 11-point sweep written",
        strategies.len(),
        composite.len()
    );
    Ok(())
}

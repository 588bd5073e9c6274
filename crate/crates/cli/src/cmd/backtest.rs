//! `backtest`: run the agent pipeline over the schedule for every trial,
//! persist transcripts and scores, and write per-trial plus
//! median-aggregated backtest results for each portfolio size.

use std::collections::BTreeMap;

use anyhow::{anyhow, Context, Result};

use tradecrew_core::agents::audit::{audit_leakage, audit_mask};
use tradecrew_core::agents::pipeline::{median_scores, run_trial};
use tradecrew_core::agents::AblationMask;
use tradecrew_core::data::{load_repository, rebalance_schedule, DataRepository, RebalancePair};
use tradecrew_core::portfolio::{run_backtest, BacktestResult, ConfigEcho};
use tradecrew_core::Month;

use crate::config::{ConfigError, RunConfig};
use crate::manifest::OutputWriter;

type ScoresByMonth = BTreeMap<Month, BTreeMap<String, f64>>;

fn provider_for(
    scores: &ScoresByMonth,
) -> impl FnMut(&tradecrew_core::data::DataView, Month) -> Result<BTreeMap<String, f64>, String> + '_
{
    move |_view, decision_month| {
        scores
            .get(&decision_month)
            .cloned()
            .ok_or_else(|| format!("no scores for decision month {decision_month}"))
    }
}

fn backtest_for(
    repo: &DataRepository,
    schedule: &[RebalancePair],
    scores: &ScoresByMonth,
    config: &RunConfig,
    mask: &AblationMask,
    n: usize,
    trials: u32,
) -> Result<BacktestResult> {
    let mut provider = provider_for(scores);
    let mut result = run_backtest(repo, schedule, &mut provider, n, config.cost_bps)?;
    result.config = ConfigEcho {
        n,
        granularity: Some(config.granularity.to_string()),
        mask: mask.excluded_roles().map(|r| r.to_string()).collect(),
        trials,
        cost_bps: config.cost_bps,
    };
    Ok(result)
}

pub fn cmd_backtest(config: &RunConfig, out: &std::path::Path, sweep_masks: bool) -> Result<()> {
    let (repo, report) = load_repository(&config.data_root, &config.universe_path())?;
    if !report.is_clean() {
        for r in &report.rejected {
            log::warn!("rejected fixture row: {r}");
        }
    }
    // Decisions happen at the month-ends preceding the performance window.
    let decision_start = config.start_month.prev();
    let decision_end = config.end_month.prev();
    let schedule = rebalance_schedule(&repo.calendar, decision_start, decision_end)
        .map_err(|e| anyhow!(ConfigError(format!("window not covered by fixtures: {e}"))))?;
    let max_n = config.portfolio_sizes.iter().copied().max().unwrap_or(0);
    if repo.universe.len() < max_n {
        return Err(anyhow!(ConfigError(format!(
            "portfolio size {max_n} exceeds universe of {}",
            repo.universe.len()
        ))));
    }
    let backend = config.chat_backend()?;
    let masks: Vec<AblationMask> = if sweep_masks {
        AblationMask::leave_one_out_sweep()
    } else {
        vec![AblationMask::from_roles(&config.mask)
            .map_err(|e| anyhow!(ConfigError(e.to_string())))?]
    };

    let mut writer = OutputWriter::new(out, "backtest")?;
    for mask in &masks {
        let prefix = format!("{}/{}", config.granularity, mask.label());
        let mut trial_scores: Vec<ScoresByMonth> = Vec::with_capacity(config.trials as usize);
        for trial in 0..config.trials {
            let (scores, store) = run_trial(
                &repo,
                &schedule,
                config.granularity,
                mask,
                trial,
                backend.as_ref(),
            )?;
            // Every trial's transcripts are audited before anything is
            // persisted: any dated datum past a decision cutoff or any
            // trace of an excluded role aborts the run.
            let leaks = audit_leakage(&store, &repo.calendar);
            if !leaks.is_empty() {
                return Err(anyhow!(
                    "{prefix} trial {trial}: {} leakage violation(s), first: {}",
                    leaks.len(),
                    leaks[0]
                ));
            }
            let mask_violations = audit_mask(&store, mask);
            if !mask_violations.is_empty() {
                return Err(anyhow!(
                    "{prefix} trial {trial}: {} mask violation(s), first: {}",
                    mask_violations.len(),
                    mask_violations[0]
                ));
            }
            let transcript_rel = format!("{prefix}/transcripts/trial_{trial}.jsonl");
            let mut jsonl = String::new();
            for record in store.records() {
                jsonl.push_str(&serde_json::to_string(record)?);
                jsonl.push('\n');
            }
            writer.write(&transcript_rel, jsonl)?;
            writer.write_json(&format!("{prefix}/scores/trial_{trial}.json"), &scores)?;

            for &n in &config.portfolio_sizes {
                let result = backtest_for(&repo, &schedule, &scores, config, mask, n, 1)
                    .with_context(|| format!("trial {trial}, N={n}"))?;
                writer.write_json(
                    &format!("{prefix}/results/N{n}/trial_{trial}.json"),
                    &result,
                )?;
                writer.write(
                    &format!("{prefix}/results/N{n}/trial_{trial}.csv"),
                    result.to_csv(),
                )?;
            }
            trial_scores.push(scores);
        }

        // Median-aggregate scores across trials, then one backtest per N.
        let months: Vec<Month> = schedule.iter().map(|p| p.decision_month()).collect();
        let mut aggregated: ScoresByMonth = BTreeMap::new();
        for month in months {
            let per_trial: Vec<BTreeMap<String, f64>> = trial_scores
                .iter()
                .filter_map(|scores| scores.get(&month).cloned())
                .collect();
            aggregated.insert(month, median_scores(&per_trial));
        }
        for &n in &config.portfolio_sizes {
            let result = backtest_for(
                &repo,
                &schedule,
                &aggregated,
                config,
                mask,
                n,
                config.trials,
            )
            .with_context(|| format!("median aggregate, N={n}"))?;
            // Both Sharpe flavors, labeled: monthly-units and annualized.
            let monthly = result
                .net_sharpe()
                .map(|s| format!("{s:.3}"))
                .unwrap_or_else(|_| "n/a".into());
            let annualized = tradecrew_core::portfolio::annualize(&result.net_returns())
                .ok()
                .and_then(|s| s.ann_sharpe)
                .map(|s| format!("{s:.3}"))
                .unwrap_or_else(|| "n/a".into());
            println!(
                "backtest: {prefix} N{n} median net sharpe: {monthly} monthly, {annualized} annualized"
            );
            writer.write_json(&format!("{prefix}/results/N{n}/median.json"), &result)?;
            writer.write(
                &format!("{prefix}/results/N{n}/median.csv"),
                result.to_csv(),
            )?;
        }
        println!(
            "backtest: {} months x {} trials done for {}",
            schedule.len(),
            config.trials,
            prefix
        );
    }
    let manifest = writer.finish()?;
    println!("backtest: manifest at {}", manifest.display());
    Ok(())
}

//! The monthly decision pipeline: Level-1 specialists per stock, sector
//! synthesis against sector averages, the monthly macro read, and the PM
//! integration that produces each stock's final score.
//!
//! Months run strictly sequentially; within a month tickers run in
//! deterministic code order. Every backend call gets one re-prompt on a
//! parse failure before the neutral fallback is recorded.

use std::collections::BTreeMap;

use crate::data::{DataRepository, DataView, PriceSeries, RebalancePair, Ticker};
use crate::fundamentals::{self, MetricMap, SectorAverage};
use crate::indicators::{self, RawPriceWindow};
use crate::num::median;
use crate::time::Month;

use super::backend::{CallKey, ChatBackend};
use super::parse::{fallback_report, parse_report};
use super::prompt::{render_prompt, PromptInputs};
use super::transcript::{TranscriptRecord, TranscriptStore};
use super::{AblationMask, AgentError, AgentReport, AgentRole, Granularity};

/// Final per-ticker scores keyed by decision month.
pub type TrialScores = BTreeMap<Month, BTreeMap<String, f64>>;

/// Shared per-run settings.
#[derive(Debug, Clone, Copy)]
pub struct RunContext<'a> {
    pub granularity: Granularity,
    pub mask: &'a AblationMask,
    pub trial_id: u32,
}

#[allow(clippy::too_many_arguments)]
fn call_agent(
    ctx: RunContext<'_>,
    role: AgentRole,
    ticker: Option<&str>,
    month: Month,
    system: String,
    user: String,
    backend: &dyn ChatBackend,
    store: &mut TranscriptStore,
) -> Result<AgentReport, AgentError> {
    let key = CallKey {
        month,
        role,
        ticker: ticker.map(str::to_string),
        granularity: ctx.granularity,
        trial_id: ctx.trial_id,
    };
    let mut raw = backend.send(&key, &system, &user)?;
    let report = match parse_report(role, key.ticker.clone(), month, &raw) {
        Ok(report) => report,
        Err(first) => {
            log::warn!("{key}: parse failed ({first}); re-prompting once");
            raw = backend.send(&key, &system, &user)?;
            match parse_report(role, key.ticker.clone(), month, &raw) {
                Ok(report) => report,
                Err(second) => {
                    log::warn!("{key}: re-prompt failed ({second}); using neutral fallback");
                    fallback_report(role, key.ticker.clone(), month, raw.clone())
                }
            }
        }
    };
    store.append(TranscriptRecord {
        month,
        role,
        ticker: key.ticker.clone(),
        granularity: ctx.granularity,
        trial_id: ctx.trial_id,
        system_prompt: system,
        user_prompt: user,
        raw_output: raw,
        report: report.clone(),
    })?;
    Ok(report)
}

fn empty_series(ticker: &Ticker) -> PriceSeries {
    PriceSeries {
        ticker: ticker.clone(),
        bars: Vec::new(),
    }
}

fn statement_info_updated(view: &DataView, code: &str) -> bool {
    let month = view.month();
    view.statements
        .get(code)
        .map(|records| {
            records
                .iter()
                .any(|r| Month::from_date(r.publish_date) == month)
        })
        .unwrap_or(false)
}

/// Run the non-excluded Level-1 specialists for one stock.
pub fn run_level1(
    view: &DataView,
    ticker: &Ticker,
    ctx: RunContext<'_>,
    backend: &dyn ChatBackend,
    store: &mut TranscriptStore,
) -> Result<BTreeMap<AgentRole, AgentReport>, AgentError> {
    let month = view.month();
    let code = ticker.code.as_str();
    let asof = view.decision_date;
    let series = view.prices.get(code);
    let no_statements = Vec::new();
    let statements = view.statements.get(code).unwrap_or(&no_statements);
    let mut reports = BTreeMap::new();

    if !ctx.mask.excludes(AgentRole::Technical) {
        let owned;
        let series = match series {
            Some(s) => s,
            None => {
                owned = empty_series(ticker);
                &owned
            }
        };
        let (system, user) = match ctx.granularity {
            Granularity::Fine => {
                let features = indicators::fine_features(series, asof);
                render_prompt(
                    AgentRole::Technical,
                    ctx.granularity,
                    &PromptInputs::TechnicalFine(&features),
                )?
            }
            Granularity::Coarse => {
                let window = indicators::coarse_window(series, asof).unwrap_or(RawPriceWindow {
                    closes: Vec::new(),
                    short_history: true,
                });
                render_prompt(
                    AgentRole::Technical,
                    ctx.granularity,
                    &PromptInputs::TechnicalCoarse(&window),
                )?
            }
        };
        let report = call_agent(
            ctx,
            AgentRole::Technical,
            Some(code),
            month,
            system,
            user,
            backend,
            store,
        )?;
        reports.insert(AgentRole::Technical, report);
    }

    if !ctx.mask.excludes(AgentRole::Quantitative) {
        let owned;
        let price_series = match series {
            Some(s) => s,
            None => {
                owned = empty_series(ticker);
                &owned
            }
        };
        let (system, user) = match ctx.granularity {
            Granularity::Fine => {
                let pack = fundamentals::fine_metrics(statements, price_series, asof);
                render_prompt(
                    AgentRole::Quantitative,
                    ctx.granularity,
                    &PromptInputs::QuantFine(&pack),
                )?
            }
            Granularity::Coarse => {
                let pack = fundamentals::coarse_pack(statements, price_series, asof);
                render_prompt(
                    AgentRole::Quantitative,
                    ctx.granularity,
                    &PromptInputs::QuantCoarse(&pack),
                )?
            }
        };
        let report = call_agent(
            ctx,
            AgentRole::Quantitative,
            Some(code),
            month,
            system,
            user,
            backend,
            store,
        )?;
        reports.insert(AgentRole::Quantitative, report);
    }

    if !ctx.mask.excludes(AgentRole::Qualitative) {
        let texts = view
            .latest_statement(code)
            .map(|r| r.texts.clone())
            .unwrap_or_default();
        let (system, user) = render_prompt(
            AgentRole::Qualitative,
            ctx.granularity,
            &PromptInputs::Qualitative {
                info_updated: statement_info_updated(view, code),
                texts: &texts,
            },
        )?;
        let report = call_agent(
            ctx,
            AgentRole::Qualitative,
            Some(code),
            month,
            system,
            user,
            backend,
            store,
        )?;
        reports.insert(AgentRole::Qualitative, report);
    }

    if !ctx.mask.excludes(AgentRole::News) {
        let items = view.news_for_month(code);
        let (system, user) = render_prompt(
            AgentRole::News,
            ctx.granularity,
            &PromptInputs::News(&items),
        )?;
        let report = call_agent(
            ctx,
            AgentRole::News,
            Some(code),
            month,
            system,
            user,
            backend,
            store,
        )?;
        reports.insert(AgentRole::News, report);
    }

    Ok(reports)
}

/// Sector synthesis: Level-1 reports plus the granularity-matched sector
/// comparison block.
#[allow(clippy::too_many_arguments)]
pub fn run_sector(
    reports: &BTreeMap<AgentRole, AgentReport>,
    target: &MetricMap,
    sector_average: &SectorAverage,
    month: Month,
    ticker: &str,
    ctx: RunContext<'_>,
    backend: &dyn ChatBackend,
    store: &mut TranscriptStore,
) -> Result<AgentReport, AgentError> {
    let (system, user) = render_prompt(
        AgentRole::Sector,
        ctx.granularity,
        &PromptInputs::Sector {
            reports,
            target,
            sector_average,
        },
    )?;
    call_agent(
        ctx,
        AgentRole::Sector,
        Some(ticker),
        month,
        system,
        user,
        backend,
        store,
    )
}

/// Monthly macro read (one call per month, not per stock).
pub fn run_macro(
    snapshot: &crate::data::MacroSnapshot,
    month: Month,
    ctx: RunContext<'_>,
    backend: &dyn ChatBackend,
    store: &mut TranscriptStore,
) -> Result<AgentReport, AgentError> {
    let (system, user) = render_prompt(
        AgentRole::Macro,
        ctx.granularity,
        &PromptInputs::Macro(snapshot),
    )?;
    call_agent(
        ctx,
        AgentRole::Macro,
        None,
        month,
        system,
        user,
        backend,
        store,
    )
}

/// PM integration of the sector view with the macro view (when present).
pub fn run_pm(
    sector_report: &AgentReport,
    macro_report: Option<&AgentReport>,
    month: Month,
    ticker: &str,
    ctx: RunContext<'_>,
    backend: &dyn ChatBackend,
    store: &mut TranscriptStore,
) -> Result<AgentReport, AgentError> {
    let (system, user) = render_prompt(
        AgentRole::Pm,
        ctx.granularity,
        &PromptInputs::Pm {
            sector: sector_report,
            macro_report,
        },
    )?;
    call_agent(
        ctx,
        AgentRole::Pm,
        Some(ticker),
        month,
        system,
        user,
        backend,
        store,
    )
}

/// Run the whole hierarchy for one decision month. Returns the PM's final
/// score per ticker; tickers without price data are skipped.
pub fn run_month(
    view: &DataView,
    ctx: RunContext<'_>,
    backend: &dyn ChatBackend,
    store: &mut TranscriptStore,
) -> Result<BTreeMap<String, f64>, AgentError> {
    let month = view.month();
    let asof = view.decision_date;

    // Sector context: packs for the whole universe in the run granularity.
    let mut context_maps: BTreeMap<String, MetricMap> = BTreeMap::new();
    let empty = Vec::new();
    for ticker in &view.universe {
        let Some(series) = view.prices.get(&ticker.code) else {
            continue;
        };
        let statements = view.statements.get(&ticker.code).unwrap_or(&empty);
        let map = match ctx.granularity {
            Granularity::Fine => {
                fundamentals::fine_metrics(statements, series, asof).sector_context_map()
            }
            Granularity::Coarse => {
                fundamentals::coarse_pack(statements, series, asof).sector_context_map()
            }
        };
        context_maps.insert(ticker.code.clone(), map);
    }
    let averages = fundamentals::sector_averages(&context_maps, &view.universe)
        .map_err(|e| AgentError::Backend(format!("sector averaging failed: {e}")))?;

    let macro_report = if ctx.mask.excludes(AgentRole::Macro) {
        None
    } else {
        match view.latest_macro() {
            Some(snapshot) => Some(run_macro(snapshot, month, ctx, backend, store)?),
            None => {
                log::warn!("{month}: no macro snapshot available; PM runs without one");
                None
            }
        }
    };

    let mut tickers: Vec<&Ticker> = view.universe.iter().collect();
    tickers.sort_by(|a, b| a.code.cmp(&b.code));
    let mut scores = BTreeMap::new();
    for ticker in tickers {
        let Some(target) = context_maps.get(&ticker.code) else {
            continue;
        };
        let sector_average = averages
            .get(&ticker.sector)
            .expect("sector present by construction");
        let level1 = run_level1(view, ticker, ctx, backend, store)?;
        let sector = run_sector(
            &level1,
            target,
            sector_average,
            month,
            &ticker.code,
            ctx,
            backend,
            store,
        )?;
        let pm = run_pm(
            &sector,
            macro_report.as_ref(),
            month,
            &ticker.code,
            ctx,
            backend,
            store,
        )?;
        let score = pm.primary_score().expect("pm reports a single score");
        scores.insert(ticker.code.clone(), score);
    }
    Ok(scores)
}

/// One full trial: `run_month` across the schedule. Returns final scores
/// keyed by decision month, plus the trial's transcripts.
pub fn run_trial(
    repo: &DataRepository,
    schedule: &[RebalancePair],
    granularity: Granularity,
    mask: &AblationMask,
    trial_id: u32,
    backend: &dyn ChatBackend,
) -> Result<(TrialScores, TranscriptStore), AgentError> {
    let ctx = RunContext {
        granularity,
        mask,
        trial_id,
    };
    let mut store = TranscriptStore::new();
    let mut scores = BTreeMap::new();
    for pair in schedule {
        let view = crate::data::slice_asof(repo, pair.decision_date);
        let month_scores = run_month(&view, ctx, backend, &mut store)?;
        scores.insert(pair.decision_month(), month_scores);
    }
    Ok((scores, store))
}

/// Per-ticker median across trials (even counts take the mean of the two
/// central values). Tickers scored in any trial appear in the output.
pub fn median_scores(trials: &[BTreeMap<String, f64>]) -> BTreeMap<String, f64> {
    let mut by_ticker: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for trial in trials {
        for (ticker, score) in trial {
            by_ticker.entry(ticker).or_default().push(*score);
        }
    }
    by_ticker
        .into_iter()
        .map(|(ticker, scores)| {
            let m = median(&scores).expect("non-empty by construction");
            (ticker.to_string(), m)
        })
        .collect()
}

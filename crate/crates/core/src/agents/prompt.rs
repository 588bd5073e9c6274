//! Prompt rendering from versioned template assets.
//!
//! Templates live under `templates/` and are compiled in with
//! `include_str!`; swapping the assets (e.g. for a different prompt
//! language) changes no code. Rendering is deterministic: numeric values
//! are formatted at 4 significant digits and missing values as the literal
//! `NaN`, so identical inputs always produce byte-identical prompts.

use std::collections::BTreeMap;

use crate::data::{MacroSnapshot, NewsItem, StatementTexts, MACRO_INDICATORS};
use crate::fundamentals::{
    CoarsePack, FineMetricPack, ItemValue, MetricMap, MetricValue, SectorAverage,
};
use crate::indicators::{RawPriceWindow, TechnicalFeatureSet};
use crate::num::{fmt_opt, fmt_sig};

use super::{AgentError, AgentReport, AgentRole, Granularity, ReportScores};

/// Bumped whenever a template asset changes.
pub const TEMPLATE_VERSION: &str = "v1";

const TECHNICAL_SYSTEM: &str = include_str!("templates/technical_system.txt");
const TECHNICAL_FINE_USER: &str = include_str!("templates/technical_fine_user.txt");
const TECHNICAL_COARSE_USER: &str = include_str!("templates/technical_coarse_user.txt");
const QUANT_SYSTEM: &str = include_str!("templates/quant_system.txt");
const QUANT_FINE_USER: &str = include_str!("templates/quant_fine_user.txt");
const QUANT_COARSE_USER: &str = include_str!("templates/quant_coarse_user.txt");
const QUALITATIVE_SYSTEM: &str = include_str!("templates/qualitative_system.txt");
const QUALITATIVE_USER: &str = include_str!("templates/qualitative_user.txt");
const NEWS_SYSTEM: &str = include_str!("templates/news_system.txt");
const NEWS_USER: &str = include_str!("templates/news_user.txt");
const SECTOR_SYSTEM: &str = include_str!("templates/sector_system.txt");
const SECTOR_USER: &str = include_str!("templates/sector_user.txt");
const MACRO_SYSTEM: &str = include_str!("templates/macro_system.txt");
const MACRO_USER: &str = include_str!("templates/macro_user.txt");
const PM_SYSTEM: &str = include_str!("templates/pm_system.txt");
const PM_USER: &str = include_str!("templates/pm_user.txt");

/// Role-specific inputs for [`render_prompt`].
#[derive(Debug)]
pub enum PromptInputs<'a> {
    TechnicalFine(&'a TechnicalFeatureSet),
    TechnicalCoarse(&'a RawPriceWindow),
    QuantFine(&'a FineMetricPack),
    QuantCoarse(&'a CoarsePack),
    Qualitative {
        info_updated: bool,
        texts: &'a StatementTexts,
    },
    News(&'a [&'a NewsItem]),
    Sector {
        reports: &'a BTreeMap<AgentRole, AgentReport>,
        target: &'a MetricMap,
        sector_average: &'a SectorAverage,
    },
    Macro(&'a MacroSnapshot),
    Pm {
        sector: &'a AgentReport,
        macro_report: Option<&'a AgentReport>,
    },
}

/// Substitute `{ident}` placeholders; anything that is not a lowercase
/// identifier in braces (JSON literals, for instance) passes through
/// verbatim. A valid identifier without a binding is a template bug.
fn fill(template: &str, values: &BTreeMap<&str, String>) -> Result<String, AgentError> {
    let bytes = template.as_bytes();
    let mut out = String::with_capacity(template.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < bytes.len()
                && (bytes[j].is_ascii_lowercase() || bytes[j].is_ascii_digit() || bytes[j] == b'_')
            {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'}' {
                let name = &template[i + 1..j];
                let value = values
                    .get(name)
                    .ok_or_else(|| AgentError::UnknownPlaceholder(name.to_string()))?;
                out.push_str(value);
                i = j + 1;
                continue;
            }
        }
        let ch = template[i..].chars().next().expect("in bounds");
        out.push(ch);
        i += ch.len_utf8();
    }
    Ok(out)
}

fn yes_no(b: bool) -> String {
    if b {
        "Yes".into()
    } else {
        "No".into()
    }
}

fn pct(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{}%", fmt_sig(x, 4)),
        None => "NaN".into(),
    }
}

fn value_diff(m: MetricValue) -> String {
    format!("{} (diff: {})", fmt_opt(m.value, 4), fmt_opt(m.diff, 4))
}

fn value_roc(v: ItemValue) -> String {
    format!("{} (RoC: {})", fmt_opt(v.value, 4), pct(v.roc))
}

/// Render the system and user prompt for `role` under the run granularity.
pub fn render_prompt(
    role: AgentRole,
    granularity: Granularity,
    inputs: &PromptInputs,
) -> Result<(String, String), AgentError> {
    let mismatch = || AgentError::RoleInputMismatch { role };
    match (role, inputs) {
        (AgentRole::Technical, PromptInputs::TechnicalFine(features)) => {
            if granularity != Granularity::Fine {
                return Err(mismatch());
            }
            let mut v = BTreeMap::new();
            let [d5, d10, d20, _d30] = features.roc_days;
            v.insert("roc_5d", pct(d5));
            v.insert("roc_10d", pct(d10));
            v.insert("roc_20d", pct(d20));
            let [m1, m3, m6, m12] = features.roc_months;
            v.insert("roc_1m", pct(m1));
            v.insert("roc_3m", pct(m3));
            v.insert("roc_6m", pct(m6));
            v.insert("roc_12m", pct(m12));
            v.insert("bollinger_z", fmt_opt(features.bollinger_z, 4));
            v.insert("rsi", fmt_opt(features.rsi, 4));
            v.insert("macd", fmt_opt(features.macd_norm, 4));
            v.insert("signal", fmt_opt(features.signal_norm, 4));
            v.insert("hist", fmt_opt(features.hist_norm, 4));
            v.insert("pct_k", fmt_opt(features.pct_k, 4));
            v.insert("pct_d", fmt_opt(features.pct_d, 4));
            v.insert("j", fmt_opt(features.j, 4));
            Ok((TECHNICAL_SYSTEM.to_string(), fill(TECHNICAL_FINE_USER, &v)?))
        }
        (AgentRole::Technical, PromptInputs::TechnicalCoarse(window)) => {
            if granularity != Granularity::Coarse {
                return Err(mismatch());
            }
            let mut v = BTreeMap::new();
            let prices = window
                .closes
                .iter()
                .map(|c| fmt_sig(*c, 4))
                .collect::<Vec<_>>()
                .join(", ");
            v.insert(
                "prices",
                if prices.is_empty() {
                    "NaN".into()
                } else {
                    prices
                },
            );
            v.insert(
                "short_history_note",
                if window.short_history {
                    "Note: fewer than 252 days of history are available; the full available window is shown.\n".into()
                } else {
                    String::new()
                },
            );
            Ok((
                TECHNICAL_SYSTEM.to_string(),
                fill(TECHNICAL_COARSE_USER, &v)?,
            ))
        }
        (AgentRole::Quantitative, PromptInputs::QuantFine(pack)) => {
            if granularity != Granularity::Fine {
                return Err(mismatch());
            }
            let mut v = BTreeMap::new();
            v.insert("info_updated", yes_no(pack.info_updated));
            v.insert("net_margin", value_diff(pack.net_margin));
            v.insert("roa", value_diff(pack.roa));
            v.insert("roe", value_diff(pack.roe));
            v.insert("asset_turnover", value_diff(pack.asset_turnover));
            v.insert("inventory_turn_days", value_diff(pack.inventory_turn_days));
            v.insert("per", value_diff(pack.per));
            v.insert("fcf", value_diff(pack.fcf));
            v.insert("fcf_margin", value_diff(pack.fcf_margin));
            v.insert("ebitda", value_diff(pack.ebitda));
            v.insert("equity_ratio", value_diff(pack.equity_ratio));
            v.insert("quick_ratio", value_diff(pack.quick_ratio));
            v.insert("de_ratio", value_diff(pack.de_ratio));
            v.insert("sales_yoy", value_diff(pack.sales_yoy));
            v.insert("sales_cagr_3y", value_diff(pack.sales_cagr_3y));
            v.insert("eps_growth", value_diff(pack.eps_growth));
            v.insert("dps", value_diff(pack.dps));
            Ok((QUANT_SYSTEM.to_string(), fill(QUANT_FINE_USER, &v)?))
        }
        (AgentRole::Quantitative, PromptInputs::QuantCoarse(pack)) => {
            if granularity != Granularity::Coarse {
                return Err(mismatch());
            }
            let mut v = BTreeMap::new();
            v.insert("info_updated", yes_no(pack.info_updated));
            v.insert("sales", value_roc(pack.sales));
            v.insert("cost_of_sales", value_roc(pack.cost_of_sales));
            v.insert("operating_profit", value_roc(pack.operating_profit));
            v.insert("net_income", value_roc(pack.net_income));
            v.insert("depreciation", value_roc(pack.depreciation));
            v.insert("eps", value_roc(pack.eps));
            v.insert("eps_1y_ago", fmt_opt(pack.eps_1y_ago, 4));
            v.insert("eps_3y_ago", fmt_opt(pack.eps_3y_ago, 4));
            v.insert("total_assets", value_roc(pack.total_assets));
            v.insert("cash", value_roc(pack.cash));
            v.insert("receivables", value_roc(pack.receivables));
            v.insert("inventory", value_roc(pack.inventory));
            v.insert("financial_assets", value_roc(pack.financial_assets));
            v.insert("equity", value_roc(pack.equity));
            v.insert(
                "interest_bearing_debt",
                value_roc(pack.interest_bearing_debt),
            );
            v.insert("current_liabilities", value_roc(pack.current_liabilities));
            v.insert("operating_cf", value_roc(pack.operating_cf));
            v.insert("investing_cf", value_roc(pack.investing_cf));
            v.insert("dividends_per_share", value_roc(pack.dividends_per_share));
            v.insert("issued_shares", value_roc(pack.issued_shares));
            v.insert("monthly_close", value_roc(pack.monthly_close));
            Ok((QUANT_SYSTEM.to_string(), fill(QUANT_COARSE_USER, &v)?))
        }
        (
            AgentRole::Qualitative,
            PromptInputs::Qualitative {
                info_updated,
                texts,
            },
        ) => {
            let section = |t: &Option<String>| t.clone().unwrap_or_else(|| "NaN".into());
            let mut v = BTreeMap::new();
            v.insert("info_updated", yes_no(*info_updated));
            v.insert("business_overview", section(&texts.business_overview));
            v.insert("business_risks", section(&texts.business_risks));
            v.insert("mdna", section(&texts.mdna));
            v.insert("governance", section(&texts.governance));
            Ok((QUALITATIVE_SYSTEM.to_string(), fill(QUALITATIVE_USER, &v)?))
        }
        (AgentRole::News, PromptInputs::News(items)) => {
            let mut v = BTreeMap::new();
            let lines = if items.is_empty() {
                "NaN".to_string()
            } else {
                items
                    .iter()
                    .map(|n| format!("- [{}] {} / {}", n.date, n.headline, n.summary))
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            v.insert("news_lines", lines);
            Ok((NEWS_SYSTEM.to_string(), fill(NEWS_USER, &v)?))
        }
        (
            AgentRole::Sector,
            PromptInputs::Sector {
                reports,
                target,
                sector_average,
            },
        ) => {
            let mut lines = Vec::new();
            for role in AgentRole::LEVEL1 {
                let Some(report) = reports.get(&role) else {
                    continue;
                };
                let line = match (&role, &report.scores) {
                    (AgentRole::Technical, ReportScores::Single { score }) => {
                        format!("- Technical Analyst: score {score}. {}", report.reason)
                    }
                    (AgentRole::Quantitative, ReportScores::Single { score }) => {
                        format!(
                            "- Quant Fundamental Analyst: score {score}. {}",
                            report.reason
                        )
                    }
                    (
                        AgentRole::Qualitative,
                        ReportScores::Qualitative {
                            business,
                            risk,
                            management_trust,
                        },
                    ) => format!(
                        "- Qualitative Strategic Analyst: business {business}, risk {risk}, management trust {management_trust}. {}",
                        report.reason
                    ),
                    (
                        AgentRole::News,
                        ReportScores::News {
                            return_outlook,
                            risk_outlook,
                        },
                    ) => format!(
                        "- News Analyst: return outlook {return_outlook}, risk outlook {risk_outlook}. {}",
                        report.reason
                    ),
                    _ => return Err(mismatch()),
                };
                lines.push(line);
            }
            if lines.is_empty() {
                lines.push("- (no analyst reports available)".to_string());
            }
            let mut context = Vec::new();
            for (label, value) in target.iter() {
                let (avg, count) = sector_average
                    .metrics
                    .get(label)
                    .map(|(a, c)| (*a, *c))
                    .unwrap_or((None, 0));
                context.push(format!(
                    "- {label}: {} vs {} ({count})",
                    fmt_opt(*value, 4),
                    fmt_opt(avg, 4)
                ));
            }
            let mut v = BTreeMap::new();
            v.insert("analyst_reports", lines.join("\n"));
            v.insert(
                "context_label",
                match granularity {
                    Granularity::Fine => "financial ratios".to_string(),
                    Granularity::Coarse => "line-item rates of change".to_string(),
                },
            );
            v.insert("sector_context", context.join("\n"));
            Ok((SECTOR_SYSTEM.to_string(), fill(SECTOR_USER, &v)?))
        }
        (AgentRole::Macro, PromptInputs::Macro(snapshot)) => {
            let mut v = BTreeMap::new();
            for name in MACRO_INDICATORS {
                let rendered = match snapshot.indicators.get(name) {
                    Some(ind) => format!("{} (RoC: {})", fmt_sig(ind.level, 4), pct(ind.mom_roc)),
                    None => "NaN".to_string(),
                };
                v.insert(name, rendered);
            }
            Ok((MACRO_SYSTEM.to_string(), fill(MACRO_USER, &v)?))
        }
        (
            AgentRole::Pm,
            PromptInputs::Pm {
                sector,
                macro_report,
            },
        ) => {
            let sector_json = report_json(sector).ok_or_else(mismatch)?;
            let mut blocks = Vec::new();
            let clause = match macro_report {
                Some(m) => {
                    let macro_json = report_json(m).ok_or_else(mismatch)?;
                    blocks.push(format!("[1. Macro environment report]\n{macro_json}"));
                    blocks.push(format!("[2. Sector specialist report]\n{sector_json}"));
                    "the top-down macro view with the bottom-up sector and stock view"
                }
                None => {
                    blocks.push(format!("[1. Sector specialist report]\n{sector_json}"));
                    "the bottom-up sector and stock view with overall risk discipline"
                }
            };
            let mut sys = BTreeMap::new();
            sys.insert("integration_clause", clause.to_string());
            let mut usr = BTreeMap::new();
            usr.insert("report_blocks", blocks.join("\n"));
            Ok((fill(PM_SYSTEM, &sys)?, fill(PM_USER, &usr)?))
        }
        _ => Err(mismatch()),
    }
}

/// Canonical JSON re-rendering of an upstream report for embedding in a
/// downstream prompt (deterministic key order).
fn report_json(report: &AgentReport) -> Option<String> {
    let value = match &report.scores {
        ReportScores::Single { score } => serde_json::json!({
            "score": score,
            "investment_thesis": report.reason,
        }),
        ReportScores::Macro {
            market_direction,
            risk_sentiment,
            economic_growth,
            interest_rates,
            inflation,
        } => serde_json::json!({
            "metrics": {
                "market_trend": {"score": market_direction},
                "risk_environment": {"score": risk_sentiment},
                "economic_growth": {"score": economic_growth},
                "interest_rates": {"score": interest_rates},
                "inflation": {"score": inflation},
            },
            "summary": report.reason,
        }),
        _ => return None,
    };
    Some(value.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::Month;

    fn empty_features() -> TechnicalFeatureSet {
        TechnicalFeatureSet {
            roc_days: [None; 4],
            roc_months: [None; 4],
            bollinger_z: None,
            macd_norm: None,
            signal_norm: None,
            hist_norm: None,
            rsi: None,
            pct_k: None,
            pct_d: None,
            j: None,
        }
    }

    #[test]
    fn all_missing_features_render_nan() {
        let features = empty_features();
        let (_, user) = render_prompt(
            AgentRole::Technical,
            Granularity::Fine,
            &PromptInputs::TechnicalFine(&features),
        )
        .unwrap();
        // One NaN per indicator slot in the block.
        let this_month = user
            .split("This month's technical indicators:")
            .nth(1)
            .unwrap();
        assert_eq!(this_month.matches("NaN").count(), 15);
    }

    #[test]
    fn rendering_is_deterministic() {
        let features = empty_features();
        let a = render_prompt(
            AgentRole::Technical,
            Granularity::Fine,
            &PromptInputs::TechnicalFine(&features),
        )
        .unwrap();
        let b = render_prompt(
            AgentRole::Technical,
            Granularity::Fine,
            &PromptInputs::TechnicalFine(&features),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn news_empty_slice_renders_no_news_path() {
        let items: Vec<&NewsItem> = Vec::new();
        let (_, user) = render_prompt(
            AgentRole::News,
            Granularity::Fine,
            &PromptInputs::News(&items),
        )
        .unwrap();
        assert!(user.contains("set both scores to 1 and the reason to \"No News\""));
        assert!(user.contains("News list for the month (input data):\nNaN"));
    }

    #[test]
    fn role_input_mismatch_is_an_error() {
        let features = empty_features();
        let err = render_prompt(
            AgentRole::Quantitative,
            Granularity::Fine,
            &PromptInputs::TechnicalFine(&features),
        )
        .unwrap_err();
        assert!(matches!(err, AgentError::RoleInputMismatch { .. }));
        // Granularity mismatch is also rejected.
        let err = render_prompt(
            AgentRole::Technical,
            Granularity::Coarse,
            &PromptInputs::TechnicalFine(&features),
        )
        .unwrap_err();
        assert!(matches!(err, AgentError::RoleInputMismatch { .. }));
    }

    #[test]
    fn pm_prompt_omits_macro_block_when_masked() {
        let sector = AgentReport {
            role: AgentRole::Sector,
            ticker: Some("1001".into()),
            month: Month::new(2023, 10),
            scores: ReportScores::Single { score: 61 },
            reason: "sector view".into(),
            raw: String::new(),
            fallback: false,
        };
        let (sys, user) = render_prompt(
            AgentRole::Pm,
            Granularity::Fine,
            &PromptInputs::Pm {
                sector: &sector,
                macro_report: None,
            },
        )
        .unwrap();
        assert!(!sys.to_lowercase().contains("macro"));
        assert!(!user.to_lowercase().contains("macro"));
        assert!(user.contains("[1. Sector specialist report]"));
    }

    #[test]
    fn fill_rejects_unknown_placeholder() {
        let v = BTreeMap::new();
        let err = fill("hello {missing_key}", &v).unwrap_err();
        assert!(matches!(err, AgentError::UnknownPlaceholder(name) if name == "missing_key"));
    }

    #[test]
    fn fill_passes_json_braces_through() {
        let v = BTreeMap::new();
        let out = fill("{\"score\": 1} and {{}}", &v).unwrap();
        assert_eq!(out, "{\"score\": 1} and {{}}");
    }

    // Pinned digests of rendered prompts for fixed inputs. These change
    // whenever a template asset or the numeric formatting changes: update
    // them together with TEMPLATE_VERSION.
    #[test]
    fn rendered_prompts_match_pinned_template_version() {
        use sha2::{Digest, Sha256};
        assert_eq!(TEMPLATE_VERSION, "v1");
        let digest = |system: &str, user: &str| {
            let mut h = Sha256::new();
            h.update(system.as_bytes());
            h.update([0u8]);
            h.update(user.as_bytes());
            h.finalize()
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect::<String>()
        };

        let features = empty_features();
        let (sys, user) = render_prompt(
            AgentRole::Technical,
            Granularity::Fine,
            &PromptInputs::TechnicalFine(&features),
        )
        .unwrap();
        assert_eq!(
            digest(&sys, &user),
            "185e091f16656efed2201cbd6d12d3907634eec984df79708d22d33fafe20797",
            "technical fine prompt drifted; bump TEMPLATE_VERSION"
        );

        let snapshot = crate::data::MacroSnapshot {
            as_of: Month::new(2023, 9),
            indicators: crate::data::MACRO_INDICATORS
                .iter()
                .enumerate()
                .map(|(i, name)| {
                    (
                        name.to_string(),
                        crate::data::MacroIndicator {
                            level: 100.0 + i as f64,
                            mom_roc: (i % 2 == 0).then_some(0.5),
                        },
                    )
                })
                .collect(),
        };
        let (sys, user) = render_prompt(
            AgentRole::Macro,
            Granularity::Fine,
            &PromptInputs::Macro(&snapshot),
        )
        .unwrap();
        assert_eq!(
            digest(&sys, &user),
            "c4b4e51986be3dae9367e9645f823242c17d5555a37bfb60844978ad59cbb2b9",
            "macro prompt drifted; bump TEMPLATE_VERSION"
        );

        let items: Vec<&NewsItem> = Vec::new();
        let (sys, user) = render_prompt(
            AgentRole::News,
            Granularity::Coarse,
            &PromptInputs::News(&items),
        )
        .unwrap();
        assert_eq!(
            digest(&sys, &user),
            "79657fe9a97f025666318f4b70ec5ca01078bc4cd48ae603ecc3bbd403d1b110",
            "news prompt drifted; bump TEMPLATE_VERSION"
        );
    }
}

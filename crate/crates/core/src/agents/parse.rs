//! Parsing and validating raw model output into [`AgentReport`]s.
//!
//! Models are asked for strict JSON but real outputs drift: the parser
//! extracts the first balanced JSON object from the text, then validates
//! the role's score bounds. Unrecoverable outputs become the neutral
//! fallback report, flagged and logged by the pipeline.

use serde_json::Value;

use crate::time::Month;

use super::{AgentReport, AgentRole, ReportScores};

/// Why a raw output could not become a report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFailure(pub String);

impl std::fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// The first balanced `{...}` object in `raw`, string- and escape-aware.
pub fn extract_first_json(raw: &str) -> Option<&str> {
    let bytes = raw.as_bytes();
    let start = raw.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&raw[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

fn get_int(value: &Value, keys: &[&str]) -> Result<u8, ParseFailure> {
    for key in keys {
        if let Some(v) = value.get(key) {
            let n = v
                .as_f64()
                .ok_or_else(|| ParseFailure(format!("field {key} is not a number")))?;
            if n.fract() != 0.0 || !(0.0..=255.0).contains(&n) {
                return Err(ParseFailure(format!("field {key} is not a small integer")));
            }
            return Ok(n as u8);
        }
    }
    Err(ParseFailure(format!("missing field {:?}", keys[0])))
}

fn get_text(value: &Value, keys: &[&str]) -> Result<String, ParseFailure> {
    for key in keys {
        if let Some(v) = value.get(key) {
            let s = v
                .as_str()
                .ok_or_else(|| ParseFailure(format!("field {key} is not a string")))?;
            if s.is_empty() {
                return Err(ParseFailure(format!("field {key} is empty")));
            }
            return Ok(s.to_string());
        }
    }
    Err(ParseFailure(format!("missing field {:?}", keys[0])))
}

/// Parse and bounds-check one raw output for `role`.
pub fn parse_report(
    role: AgentRole,
    ticker: Option<String>,
    month: Month,
    raw: &str,
) -> Result<AgentReport, ParseFailure> {
    let json_text =
        extract_first_json(raw).ok_or_else(|| ParseFailure("no JSON object found".into()))?;
    let value: Value =
        serde_json::from_str(json_text).map_err(|e| ParseFailure(format!("invalid JSON: {e}")))?;

    let (scores, reason) = match role {
        AgentRole::Technical | AgentRole::Quantitative => (
            ReportScores::Single {
                score: get_int(&value, &["score"])?,
            },
            get_text(&value, &["reason", "comment"])?,
        ),
        AgentRole::Sector => (
            ReportScores::Single {
                score: get_int(&value, &["score"])?,
            },
            get_text(&value, &["investment_thesis", "reason"])?,
        ),
        AgentRole::Pm => (
            ReportScores::Single {
                score: get_int(&value, &["final_score", "score"])?,
            },
            get_text(&value, &["reason"])?,
        ),
        AgentRole::Qualitative => (
            ReportScores::Qualitative {
                business: get_int(&value, &["business", "business_momentum"])?,
                risk: get_int(&value, &["risk", "risk_severity"])?,
                management_trust: get_int(&value, &["management_trust", "management"])?,
            },
            get_text(&value, &["insight", "reason"])?,
        ),
        AgentRole::News => (
            ReportScores::News {
                return_outlook: get_int(&value, &["return_outlook"])?,
                risk_outlook: get_int(&value, &["risk_outlook"])?,
            },
            get_text(&value, &["reason"])?,
        ),
        AgentRole::Macro => {
            let metrics = value
                .get("metrics")
                .ok_or_else(|| ParseFailure("missing field \"metrics\"".into()))?;
            let dim = |name: &str| -> Result<u8, ParseFailure> {
                let entry = metrics
                    .get(name)
                    .ok_or_else(|| ParseFailure(format!("missing metric {name}")))?;
                get_int(entry, &["score"])
            };
            (
                ReportScores::Macro {
                    market_direction: dim("market_trend")?,
                    risk_sentiment: dim("risk_environment")?,
                    economic_growth: dim("economic_growth")?,
                    interest_rates: dim("interest_rates")?,
                    inflation: dim("inflation")?,
                },
                get_text(&value, &["summary", "reason"])?,
            )
        }
    };

    if !scores.valid_for(role) {
        return Err(ParseFailure(format!("scores out of bounds for {role}")));
    }
    Ok(AgentReport {
        role,
        ticker,
        month,
        scores,
        reason,
        raw: raw.to_string(),
        fallback: false,
    })
}

/// The neutral fallback report used after a failed re-prompt.
pub fn fallback_report(
    role: AgentRole,
    ticker: Option<String>,
    month: Month,
    raw: String,
) -> AgentReport {
    AgentReport {
        role,
        ticker,
        month,
        scores: ReportScores::neutral(role),
        reason: "fallback".into(),
        raw,
        fallback: true,
    }
}

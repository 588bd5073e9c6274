//! The three-level agent hierarchy: prompt rendering, chat backends,
//! output parsing, transcript persistence, and the monthly pipeline.
//!
//! Level 1 specialists (technical, quantitative, qualitative, news) score
//! one stock each month; the sector agent re-evaluates them against sector
//! averages; the macro agent reads the indicator snapshot; the portfolio
//! manager integrates sector and macro views into the final score. Every
//! call is recorded in an append-only [`transcript::TranscriptStore`], the
//! corpus for all downstream text analysis.

pub mod audit;
pub mod backend;
pub mod parse;
pub mod pipeline;
pub mod prompt;
pub mod transcript;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::Month;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("inputs do not match role {role}")]
    RoleInputMismatch { role: AgentRole },
    #[error("template references unknown placeholder {{{0}}}")]
    UnknownPlaceholder(String),
    #[error("scripted backend has no recording for {0}")]
    ScriptMiss(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("duplicate transcript key {0}")]
    DuplicateTranscript(String),
    #[error("{0} cannot be excluded by an ablation mask")]
    UnmaskableRole(AgentRole),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// The seven agent roles of the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Technical,
    Quantitative,
    Qualitative,
    News,
    Sector,
    Macro,
    Pm,
}

impl AgentRole {
    /// The four Level-1 specialist roles, in pipeline order.
    pub const LEVEL1: [AgentRole; 4] = [
        AgentRole::Technical,
        AgentRole::Quantitative,
        AgentRole::Qualitative,
        AgentRole::News,
    ];

    /// Roles an ablation mask may exclude.
    pub const MASKABLE: [AgentRole; 5] = [
        AgentRole::Technical,
        AgentRole::Quantitative,
        AgentRole::Qualitative,
        AgentRole::News,
        AgentRole::Macro,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AgentRole::Technical => "technical",
            AgentRole::Quantitative => "quantitative",
            AgentRole::Qualitative => "qualitative",
            AgentRole::News => "news",
            AgentRole::Sector => "sector",
            AgentRole::Macro => "macro",
            AgentRole::Pm => "pm",
        }
    }

    /// Substrings the mask audit greps for: any appearance of these in a
    /// prompt while the role is excluded is a violation.
    pub fn audit_tokens(&self) -> &'static [&'static str] {
        match self {
            AgentRole::Technical => &["technical"],
            AgentRole::Quantitative => &["quantitative", "quant"],
            AgentRole::Qualitative => &["qualitative"],
            AgentRole::News => &["news"],
            AgentRole::Macro => &["macro"],
            AgentRole::Sector => &["sector"],
            AgentRole::Pm => &["portfolio manager"],
        }
    }
}

impl std::fmt::Display for AgentRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether the technical and quantitative agents receive pre-computed
/// expert features (fine) or raw data (coarse). A run carries one
/// granularity; the other roles inherit the tag for transcript keying only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Fine,
    Coarse,
}

impl Granularity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Granularity::Fine => "fine",
            Granularity::Coarse => "coarse",
        }
    }
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Granularity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fine" => Ok(Granularity::Fine),
            "coarse" => Ok(Granularity::Coarse),
            other => Err(format!("unknown granularity {other:?}")),
        }
    }
}

/// Role-specific score layout, each bounded per the role contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportScores {
    /// technical, quantitative, sector, pm: one 0-100 score.
    Single { score: u8 },
    /// qualitative: three 1-5 sub-scores.
    Qualitative {
        business: u8,
        risk: u8,
        management_trust: u8,
    },
    /// news: two 1-5 outlook scores.
    News {
        return_outlook: u8,
        risk_outlook: u8,
    },
    /// macro: five 0-100 dimension scores.
    Macro {
        market_direction: u8,
        risk_sentiment: u8,
        economic_growth: u8,
        interest_rates: u8,
        inflation: u8,
    },
}

impl ReportScores {
    /// Check bounds and that the layout matches the role.
    pub fn valid_for(&self, role: AgentRole) -> bool {
        let in_100 = |v: u8| v <= 100;
        let in_5 = |v: u8| (1..=5).contains(&v);
        match (role, self) {
            (
                AgentRole::Technical | AgentRole::Quantitative | AgentRole::Sector | AgentRole::Pm,
                ReportScores::Single { score },
            ) => in_100(*score),
            (
                AgentRole::Qualitative,
                ReportScores::Qualitative {
                    business,
                    risk,
                    management_trust,
                },
            ) => in_5(*business) && in_5(*risk) && in_5(*management_trust),
            (
                AgentRole::News,
                ReportScores::News {
                    return_outlook,
                    risk_outlook,
                },
            ) => in_5(*return_outlook) && in_5(*risk_outlook),
            (
                AgentRole::Macro,
                ReportScores::Macro {
                    market_direction,
                    risk_sentiment,
                    economic_growth,
                    interest_rates,
                    inflation,
                },
            ) => {
                in_100(*market_direction)
                    && in_100(*risk_sentiment)
                    && in_100(*economic_growth)
                    && in_100(*interest_rates)
                    && in_100(*inflation)
            }
            _ => false,
        }
    }

    /// Neutral fallback layout for the role: 50 on 0-100 scales, 3 on 1-5.
    pub fn neutral(role: AgentRole) -> Self {
        match role {
            AgentRole::Technical | AgentRole::Quantitative | AgentRole::Sector | AgentRole::Pm => {
                ReportScores::Single { score: 50 }
            }
            AgentRole::Qualitative => ReportScores::Qualitative {
                business: 3,
                risk: 3,
                management_trust: 3,
            },
            AgentRole::News => ReportScores::News {
                return_outlook: 3,
                risk_outlook: 3,
            },
            AgentRole::Macro => ReportScores::Macro {
                market_direction: 50,
                risk_sentiment: 50,
                economic_growth: 50,
                interest_rates: 50,
                inflation: 50,
            },
        }
    }
}

/// A parsed, validated agent output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub role: AgentRole,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ticker: Option<String>,
    pub month: Month,
    pub scores: ReportScores,
    pub reason: String,
    /// Verbatim model output.
    pub raw: String,
    /// True when the neutral fallback replaced an unparseable output.
    #[serde(default)]
    pub fallback: bool,
}

impl AgentReport {
    /// The single 0-100 score for single-score roles.
    pub fn primary_score(&self) -> Option<f64> {
        match self.scores {
            ReportScores::Single { score } => Some(score as f64),
            _ => None,
        }
    }
}

/// Which Level-1/macro roles a run excludes. Sector and PM are never
/// maskable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationMask {
    excluded: BTreeSet<AgentRole>,
}

impl AblationMask {
    /// The all-agents configuration.
    pub fn none() -> Self {
        Self::default()
    }

    pub fn without(role: AgentRole) -> Result<Self, AgentError> {
        Self::from_roles(&[role])
    }

    pub fn from_roles(roles: &[AgentRole]) -> Result<Self, AgentError> {
        let mut excluded = BTreeSet::new();
        for role in roles {
            if !AgentRole::MASKABLE.contains(role) {
                return Err(AgentError::UnmaskableRole(*role));
            }
            excluded.insert(*role);
        }
        Ok(Self { excluded })
    }

    pub fn excludes(&self, role: AgentRole) -> bool {
        self.excluded.contains(&role)
    }

    pub fn excluded_roles(&self) -> impl Iterator<Item = AgentRole> + '_ {
        self.excluded.iter().copied()
    }

    /// `"all"` for the empty mask, else `"wo_<role>[_<role>...]"`.
    pub fn label(&self) -> String {
        if self.excluded.is_empty() {
            "all".to_string()
        } else {
            let mut parts = vec!["wo".to_string()];
            parts.extend(self.excluded.iter().map(|r| r.as_str().to_string()));
            parts.join("_")
        }
    }

    /// The all-agents mask followed by each single-role exclusion, in the
    /// fixed role order.
    pub fn leave_one_out_sweep() -> Vec<AblationMask> {
        let mut out = vec![AblationMask::none()];
        for role in AgentRole::MASKABLE {
            out.push(AblationMask::without(role).expect("maskable"));
        }
        out
    }
}

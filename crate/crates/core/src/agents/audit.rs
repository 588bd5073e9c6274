//! Post-hoc audits over a transcript store.
//!
//! The leakage audit string-scans every prompt for ISO dates and flags any
//! date later than the record month's decision cutoff. The mask audit
//! flags excluded-role records and any appearance of an excluded role's
//! name in a prompt.

use chrono::NaiveDate;
use regex::Regex;

use crate::data::TradingCalendar;

use super::transcript::TranscriptStore;
use super::{AblationMask, AgentRole};

/// A dated datum later than the month's decision cutoff appeared in a
/// prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageViolation {
    pub key: String,
    pub date: NaiveDate,
    pub decision_date: NaiveDate,
}

impl std::fmt::Display for LeakageViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: prompt references {} after decision date {}",
            self.key, self.date, self.decision_date
        )
    }
}

/// Scan every prompt for ISO dates and compare against the record month's
/// decision date (its last business day in `calendar`).
pub fn audit_leakage(store: &TranscriptStore, calendar: &TradingCalendar) -> Vec<LeakageViolation> {
    let date_re = Regex::new(r"\d{4}-\d{2}-\d{2}").expect("valid regex");
    let mut violations = Vec::new();
    for record in store.records() {
        let Some(decision_date) = calendar.last_business_day(record.month) else {
            continue;
        };
        for text in [&record.system_prompt, &record.user_prompt] {
            for m in date_re.find_iter(text) {
                let Ok(date) = m.as_str().parse::<NaiveDate>() else {
                    continue;
                };
                if date > decision_date {
                    violations.push(LeakageViolation {
                        key: record.key().to_string(),
                        date,
                        decision_date,
                    });
                }
            }
        }
    }
    violations
}

/// An excluded role left a trace: either a record of its own, or its name
/// in some prompt of the run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskViolation {
    pub key: String,
    pub role: AgentRole,
    pub detail: String,
}

impl std::fmt::Display for MaskViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: excluded role {}: {}",
            self.key, self.role, self.detail
        )
    }
}

/// Verify no excluded role produced a record and no prompt mentions an
/// excluded role's name (case-insensitive substring scan).
pub fn audit_mask(store: &TranscriptStore, mask: &AblationMask) -> Vec<MaskViolation> {
    let mut violations = Vec::new();
    for record in store.records() {
        if mask.excludes(record.role) {
            violations.push(MaskViolation {
                key: record.key().to_string(),
                role: record.role,
                detail: "record exists for excluded role".into(),
            });
            continue;
        }
        let haystack = format!(
            "{}\n{}",
            record.system_prompt.to_lowercase(),
            record.user_prompt.to_lowercase()
        );
        for role in mask.excluded_roles() {
            for token in role.audit_tokens() {
                if haystack.contains(token) {
                    violations.push(MaskViolation {
                        key: record.key().to_string(),
                        role,
                        detail: format!("prompt contains {token:?}"),
                    });
                }
            }
        }
    }
    violations
}

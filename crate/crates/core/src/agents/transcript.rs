//! Append-only transcript store: every prompt and raw output of a run,
//! keyed by (month, role, ticker, granularity, trial). This is the corpus
//! every text analysis reads from and the evidence the leakage and mask
//! audits inspect.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::time::Month;

use super::backend::CallKey;
use super::{AgentError, AgentReport, AgentRole, Granularity};

/// One recorded backend call with its parsed report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub month: Month,
    pub role: AgentRole,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ticker: Option<String>,
    /// The run granularity (roles other than technical/quantitative are
    /// granularity-neutral; the tag keys the run they belong to).
    pub granularity: Granularity,
    pub trial_id: u32,
    pub system_prompt: String,
    pub user_prompt: String,
    pub raw_output: String,
    pub report: AgentReport,
}

impl TranscriptRecord {
    pub fn key(&self) -> CallKey {
        CallKey {
            month: self.month,
            role: self.role,
            ticker: self.ticker.clone(),
            granularity: self.granularity,
            trial_id: self.trial_id,
        }
    }
}

/// Append-only store with a unique-key constraint.
#[derive(Debug, Default, Clone)]
pub struct TranscriptStore {
    records: Vec<TranscriptRecord>,
    index: BTreeSet<(Month, AgentRole, Option<String>, Granularity, u32)>,
}

impl TranscriptStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, record: TranscriptRecord) -> Result<(), AgentError> {
        let key = (
            record.month,
            record.role,
            record.ticker.clone(),
            record.granularity,
            record.trial_id,
        );
        if !self.index.insert(key) {
            return Err(AgentError::DuplicateTranscript(record.key().to_string()));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &CallKey) -> Option<&TranscriptRecord> {
        self.records.iter().find(|r| &r.key() == key)
    }

    /// Merge another store in; duplicate keys are an error.
    pub fn merge(&mut self, other: TranscriptStore) -> Result<(), AgentError> {
        for record in other.records {
            self.append(record)?;
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<(), AgentError> {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("serializable"));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|source| AgentError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load_jsonl(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|source| AgentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut store = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: TranscriptRecord = serde_json::from_str(line)
                .map_err(|e| AgentError::Backend(format!("{}:{}: {e}", path.display(), i + 1)))?;
            store.append(record)?;
        }
        Ok(store)
    }
}

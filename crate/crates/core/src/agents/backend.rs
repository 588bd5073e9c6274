//! Chat backends: live HTTP chat-completions, deterministic synthetic
//! scripts, and directory-based record/replay.
//!
//! A scripted backend is a pure function of (month, role, ticker,
//! granularity, trial, prompt-hash), so scripted runs replay bit-exactly.

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::time::Month;

use super::{AgentError, AgentRole, Granularity};

/// Identity of one backend call within a run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallKey {
    pub month: Month,
    pub role: AgentRole,
    pub ticker: Option<String>,
    pub granularity: Granularity,
    pub trial_id: u32,
}

impl CallKey {
    /// Stable file stem used by the record/replay directory format.
    pub fn file_stem(&self) -> String {
        format!(
            "{}__{}__{}__{}__t{}",
            self.month,
            self.role,
            self.ticker.as_deref().unwrap_or("-"),
            self.granularity,
            self.trial_id
        )
    }
}

impl std::fmt::Display for CallKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.file_stem())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendMode {
    Live,
    Scripted,
}

/// A chat model the pipeline can call.
pub trait ChatBackend: Send + Sync {
    fn send(
        &self,
        key: &CallKey,
        system_prompt: &str,
        user_prompt: &str,
    ) -> Result<String, AgentError>;

    fn mode(&self) -> BackendMode;
}

/// Closure-backed scripted backend, for tests and oracle scripts.
pub struct FnBackend<F>(pub F);

impl<F> ChatBackend for FnBackend<F>
where
    F: Fn(&CallKey, &str, &str) -> Result<String, AgentError> + Send + Sync,
{
    fn send(&self, key: &CallKey, system: &str, user: &str) -> Result<String, AgentError> {
        (self.0)(key, system, user)
    }

    fn mode(&self) -> BackendMode {
        BackendMode::Scripted
    }
}

// Reason vocabularies for synthetic outputs, per role and granularity.
// None of these words may contain a role name: downstream prompts embed the
// reasons, and the mask audit greps for role names.
const TECH_FINE_WORDS: [&str; 6] = [
    "momentum",
    "oscillator",
    "divergence",
    "volatility",
    "consolidation",
    "breadth",
];
const TECH_COARSE_WORDS: [&str; 6] = ["trend", "rise", "decline", "drift", "range", "breakout"];
const QUANT_FINE_WORDS: [&str; 6] = [
    "margins",
    "profitability",
    "soundness",
    "efficiency",
    "undervalued",
    "growth-rate",
];
const QUANT_COARSE_WORDS: [&str; 6] = [
    "earnings",
    "eps",
    "revenue",
    "stability",
    "increase",
    "stagnation",
];
const QUALITATIVE_WORDS: [&str; 6] = [
    "governance",
    "execution",
    "pipeline",
    "restructuring",
    "credibility",
    "headwinds",
];
const NEWS_WORDS: [&str; 6] = [
    "headline",
    "launch",
    "recall",
    "guidance",
    "litigation",
    "expansion",
];
const SECTOR_WORDS: [&str; 4] = ["rotation", "dispersion", "leadership", "laggard"];
const PM_WORDS: [&str; 4] = ["conviction", "allocation", "overweight", "underweight"];
const MACRO_WORDS: [&str; 6] = [
    "liquidity",
    "easing",
    "tightening",
    "expansionary",
    "contraction",
    "disinflation",
];

fn word_pool(role: AgentRole, granularity: Granularity) -> Vec<&'static str> {
    let by_gran = |fine: &[&'static str], coarse: &[&'static str]| match granularity {
        Granularity::Fine => fine.to_vec(),
        Granularity::Coarse => coarse.to_vec(),
    };
    match role {
        AgentRole::Technical => by_gran(&TECH_FINE_WORDS, &TECH_COARSE_WORDS),
        AgentRole::Quantitative => by_gran(&QUANT_FINE_WORDS, &QUANT_COARSE_WORDS),
        AgentRole::Qualitative => QUALITATIVE_WORDS.to_vec(),
        AgentRole::News => NEWS_WORDS.to_vec(),
        // Higher levels inherit subordinate vocabulary, so synthetic
        // transcripts exhibit upward word propagation.
        AgentRole::Sector => {
            let mut pool = by_gran(&TECH_FINE_WORDS, &TECH_COARSE_WORDS);
            pool.extend(by_gran(&QUANT_FINE_WORDS, &QUANT_COARSE_WORDS));
            pool.extend(SECTOR_WORDS);
            pool
        }
        AgentRole::Pm => {
            let mut pool = by_gran(&TECH_FINE_WORDS, &TECH_COARSE_WORDS);
            pool.extend(by_gran(&QUANT_FINE_WORDS, &QUANT_COARSE_WORDS));
            pool.extend(SECTOR_WORDS);
            pool.extend(PM_WORDS);
            pool
        }
        AgentRole::Macro => MACRO_WORDS.to_vec(),
    }
}

/// Deterministic synthetic model: hashes the call key and prompts into
/// in-bounds scores and a short reason drawn from a role-specific
/// vocabulary. Honors the news agent's empty-slice protocol.
#[derive(Debug, Default)]
pub struct SyntheticBackend;

impl SyntheticBackend {
    fn digest(key: &CallKey, system: &str, user: &str) -> [u8; 32] {
        let mut prompt_hasher = Sha256::new();
        prompt_hasher.update(system.as_bytes());
        prompt_hasher.update([0u8]);
        prompt_hasher.update(user.as_bytes());
        let prompt_hash = prompt_hasher.finalize();
        let mut hasher = Sha256::new();
        hasher.update(key.file_stem().as_bytes());
        hasher.update([0u8]);
        hasher.update(prompt_hash);
        hasher.finalize().into()
    }

    fn take_u64(digest: &[u8; 32], slot: usize) -> u64 {
        let start = (slot * 4) % 28;
        u64::from_le_bytes(digest[start..start + 8].try_into().expect("8 bytes"))
    }

    fn reason(digest: &[u8; 32], role: AgentRole, granularity: Granularity) -> String {
        let pool = word_pool(role, granularity);
        let words: Vec<&str> = (0..3)
            .map(|i| pool[Self::take_u64(digest, 4 + i) as usize % pool.len()])
            .collect();
        format!("{} {} {} balance", words[0], words[1], words[2])
    }
}

impl ChatBackend for SyntheticBackend {
    fn send(&self, key: &CallKey, system: &str, user: &str) -> Result<String, AgentError> {
        let digest = Self::digest(key, system, user);
        let score_100 = |slot: usize| Self::take_u64(&digest, slot) % 101;
        let score_5 = |slot: usize| 1 + Self::take_u64(&digest, slot) % 5;
        let reason = Self::reason(&digest, key.role, key.granularity);
        let out = match key.role {
            AgentRole::Technical | AgentRole::Quantitative => {
                serde_json::json!({"score": score_100(0), "reason": reason})
            }
            AgentRole::Sector => {
                serde_json::json!({"score": score_100(0), "investment_thesis": reason})
            }
            AgentRole::Qualitative => serde_json::json!({
                "business": score_5(0),
                "risk": score_5(1),
                "management_trust": score_5(2),
                "insight": reason,
            }),
            AgentRole::News => {
                if user.contains("News list for the month (input data):\nNaN") {
                    serde_json::json!({
                        "return_outlook": 1,
                        "risk_outlook": 1,
                        "reason": "No News",
                    })
                } else {
                    serde_json::json!({
                        "return_outlook": score_5(0),
                        "risk_outlook": score_5(1),
                        "reason": reason,
                    })
                }
            }
            AgentRole::Macro => serde_json::json!({
                "metrics": {
                    "market_trend": {"label": "synthetic", "score": score_100(0)},
                    "risk_environment": {"label": "synthetic", "score": score_100(1)},
                    "economic_growth": {"label": "synthetic", "score": score_100(2)},
                    "interest_rates": {"label": "synthetic", "score": score_100(3)},
                    "inflation": {"label": "synthetic", "score": score_100(7)},
                },
                "summary": reason,
            }),
            AgentRole::Pm => serde_json::json!({"final_score": score_100(0), "reason": reason}),
        };
        Ok(out.to_string())
    }

    fn mode(&self) -> BackendMode {
        BackendMode::Scripted
    }
}

/// One recorded backend call, as stored in a replay directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptRecord {
    pub month: Month,
    pub role: AgentRole,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ticker: Option<String>,
    pub granularity: Granularity,
    pub trial_id: u32,
    pub system_prompt: String,
    pub user_prompt: String,
    pub raw_output: String,
}

/// Replays recorded outputs from a directory of per-call JSON files.
pub struct ReplayBackend {
    dir: PathBuf,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl ChatBackend for ReplayBackend {
    fn send(&self, key: &CallKey, _system: &str, _user: &str) -> Result<String, AgentError> {
        let path = self.dir.join(format!("{}.json", key.file_stem()));
        let text =
            std::fs::read_to_string(&path).map_err(|_| AgentError::ScriptMiss(key.to_string()))?;
        let record: ScriptRecord =
            serde_json::from_str(&text).map_err(|e| AgentError::Backend(e.to_string()))?;
        Ok(record.raw_output)
    }

    fn mode(&self) -> BackendMode {
        BackendMode::Scripted
    }
}

/// Wraps another backend and records every call into a replay directory.
pub struct RecordingBackend<B> {
    inner: B,
    dir: PathBuf,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Result<Self, AgentError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|source| AgentError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Self { inner, dir })
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn send(&self, key: &CallKey, system: &str, user: &str) -> Result<String, AgentError> {
        let raw = self.inner.send(key, system, user)?;
        let record = ScriptRecord {
            month: key.month,
            role: key.role,
            ticker: key.ticker.clone(),
            granularity: key.granularity,
            trial_id: key.trial_id,
            system_prompt: system.to_string(),
            user_prompt: user.to_string(),
            raw_output: raw.clone(),
        };
        let path = self.dir.join(format!("{}.json", key.file_stem()));
        let mut text = serde_json::to_string(&record).expect("serializable");
        text.push('\n');
        std::fs::write(&path, text).map_err(|source| AgentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(raw)
    }

    fn mode(&self) -> BackendMode {
        self.inner.mode()
    }
}

/// Configuration for the live chat-completions backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiveConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub api_key: Option<String>,
    /// Model default per the protocol; scripted backends ignore it.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_temperature() -> f64 {
    1.0
}

fn default_retries() -> u32 {
    2
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

/// HTTP chat-completions client with bounded retry.
pub struct LiveChatBackend {
    config: LiveConfig,
    client: reqwest::blocking::Client,
}

impl LiveChatBackend {
    pub fn new(config: LiveConfig) -> Result<Self, AgentError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| AgentError::Backend(e.to_string()))?;
        Ok(Self { config, client })
    }

    fn try_send(&self, system: &str, user: &str) -> Result<String, AgentError> {
        let request = ChatRequest {
            model: &self.config.model,
            messages: vec![
                ChatMessage {
                    role: "system",
                    content: system,
                },
                ChatMessage {
                    role: "user",
                    content: user,
                },
            ],
            temperature: self.config.temperature,
        };
        let mut builder = self.client.post(&self.config.endpoint).json(&request);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| AgentError::Backend(e.to_string()))?;
        if !response.status().is_success() {
            return Err(AgentError::Backend(format!(
                "http status {}",
                response.status()
            )));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| AgentError::Backend(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| AgentError::Backend("empty choices".into()))
    }
}

impl ChatBackend for LiveChatBackend {
    fn send(&self, _key: &CallKey, system: &str, user: &str) -> Result<String, AgentError> {
        let mut last_err = None;
        for attempt in 0..=self.config.max_retries {
            match self.try_send(system, user) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    log::warn!("chat backend attempt {attempt} failed: {e}");
                    last_err = Some(e);
                    std::thread::sleep(Duration::from_millis(250 * (attempt as u64 + 1)));
                }
            }
        }
        Err(last_err.expect("at least one attempt"))
    }

    fn mode(&self) -> BackendMode {
        BackendMode::Live
    }
}

//! Log-odds corpus comparison with an informative Dirichlet prior.
//!
//! For token w with count y in a corpus of size n, the smoothed log-odds is
//! `f(y, n) = ln((y + a_w) / (n + a0 - y - a_w))` with a uniform per-token
//! prior `a_w` and `a0 = a_w * |vocabulary|`. The corpus-difference
//! statistic is `delta_w = f_i - f_j` with variance approximately
//! `1/(y_i + a_w) + 1/(y_j + a_w)` and `z = delta / sqrt(variance)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Token counts for one labeled corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCorpus {
    pub label: String,
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

/// Lowercased word split on non-alphanumeric boundaries; tokens without an
/// alphabetic character (bare numbers) are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && t.chars().any(|c| c.is_alphabetic()))
        .map(str::to_string)
        .collect()
}

impl TokenCorpus {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            ..Self::default()
        }
    }

    pub fn from_texts<'a>(
        label: impl Into<String>,
        texts: impl IntoIterator<Item = &'a str>,
        stopwords: &BTreeSet<String>,
    ) -> Self {
        let mut corpus = Self::new(label);
        for text in texts {
            corpus.add_text(text, stopwords);
        }
        corpus
    }

    pub fn add_text(&mut self, text: &str, stopwords: &BTreeSet<String>) {
        for token in tokenize(text) {
            if stopwords.contains(&token) {
                continue;
            }
            *self.counts.entry(token).or_insert(0) += 1;
            self.total += 1;
        }
    }

    pub fn add_token(&mut self, token: impl Into<String>, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(token.into()).or_insert(0) += count;
        self.total += count;
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

/// Per-token delta, variance, and z statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStat {
    pub token: String,
    pub count_i: u64,
    pub count_j: u64,
    pub delta: f64,
    pub variance: f64,
    pub z: f64,
}

/// Log-odds comparison of corpus i against corpus j over the union
/// vocabulary, token-sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogOddsResult {
    pub label_i: String,
    pub label_j: String,
    pub prior_scale: f64,
    pub stats: Vec<TokenStat>,
}

impl LogOddsResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("token,count_i,count_j,delta,variance,z\n");
        let mut rows: Vec<&TokenStat> = self.stats.iter().collect();
        rows.sort_by(|a, b| {
            b.z.partial_cmp(&a.z)
                .unwrap()
                .then_with(|| a.token.cmp(&b.token))
        });
        for s in rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.token, s.count_i, s.count_j, s.delta, s.variance, s.z
            ));
        }
        out
    }
}

/// The smoothed per-token comparison described in the module docs.
pub fn log_odds(
    ci: &TokenCorpus,
    cj: &TokenCorpus,
    prior_scale: f64,
) -> Result<LogOddsResult, AnalysisError> {
    if ci.is_empty() {
        return Err(AnalysisError::EmptyCorpus(ci.label.clone()));
    }
    if cj.is_empty() {
        return Err(AnalysisError::EmptyCorpus(cj.label.clone()));
    }
    let vocabulary: BTreeSet<&String> = ci.counts.keys().chain(cj.counts.keys()).collect();
    let alpha_w = prior_scale;
    let alpha0 = alpha_w * vocabulary.len() as f64;
    let ni = ci.total as f64;
    let nj = cj.total as f64;
    let f = |y: f64, n: f64| ((y + alpha_w) / (n + alpha0 - y - alpha_w)).ln();
    let stats = vocabulary
        .into_iter()
        .map(|token| {
            let yi = ci.counts.get(token).copied().unwrap_or(0) as f64;
            let yj = cj.counts.get(token).copied().unwrap_or(0) as f64;
            let delta = f(yi, ni) - f(yj, nj);
            let variance = 1.0 / (yi + alpha_w) + 1.0 / (yj + alpha_w);
            TokenStat {
                token: token.clone(),
                count_i: yi as u64,
                count_j: yj as u64,
                delta,
                variance,
                z: delta / variance.sqrt(),
            }
        })
        .collect();
    Ok(LogOddsResult {
        label_i: ci.label.clone(),
        label_j: cj.label.clone(),
        prior_scale,
        stats,
    })
}

/// The k most side-i-associated tokens (z descending) and the k most
/// side-j-associated (z ascending); ties break by token order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopTokens {
    pub side_i: Vec<TokenStat>,
    pub side_j: Vec<TokenStat>,
}

pub fn top_k(result: &LogOddsResult, k: usize) -> TopTokens {
    let mut desc: Vec<TokenStat> = result.stats.clone();
    desc.sort_by(|a, b| {
        b.z.partial_cmp(&a.z)
            .expect("finite z")
            .then_with(|| a.token.cmp(&b.token))
    });
    let mut asc: Vec<TokenStat> = result.stats.clone();
    asc.sort_by(|a, b| {
        a.z.partial_cmp(&b.z)
            .expect("finite z")
            .then_with(|| a.token.cmp(&b.token))
    });
    TopTokens {
        side_i: desc.into_iter().take(k).collect(),
        side_j: asc.into_iter().take(k).collect(),
    }
}

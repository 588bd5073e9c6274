//! Text embeddings: a deterministic offline mode for tests and studies
//! without network access, and an HTTP embeddings client for live runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::AnalysisError;

/// Produces one L2-normalized vector per input text.
pub trait EmbeddingBackend: Send + Sync {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, AnalysisError>;
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
        return v;
    }
    for x in &mut v {
        *x /= norm;
    }
    v
}

/// Seeded pseudo-embeddings: each text hashes to an RNG seed that draws a
/// Gaussian vector, normalized. Identical texts embed identically and runs
/// are bit-stable across processes.
#[derive(Debug, Clone)]
pub struct OfflineEmbedder {
    pub seed: u64,
    pub dim: usize,
}

impl Default for OfflineEmbedder {
    fn default() -> Self {
        Self { seed: 0, dim: 64 }
    }
}

impl OfflineEmbedder {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

impl EmbeddingBackend for OfflineEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, AnalysisError> {
        Ok(texts
            .iter()
            .map(|text| {
                let digest = Sha256::digest(text.as_bytes());
                let text_seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
                let mut rng = ChaCha8Rng::seed_from_u64(text_seed ^ self.seed);
                let v: Vec<f64> = (0..self.dim)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                normalize(v)
            })
            .collect())
    }
}

/// Configuration for the HTTP embeddings endpoint (same wire pattern as the
/// chat backend).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpEmbedderConfig {
    pub endpoint: String,
    #[serde(default = "default_embedding_model")]
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub api_key: Option<String>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_embedding_model() -> String {
    "text-embedding-3-small".to_string()
}

fn default_retries() -> u32 {
    2
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

/// Live embeddings client with bounded retry.
pub struct HttpEmbedder {
    config: HttpEmbedderConfig,
    client: reqwest::blocking::Client,
}

impl HttpEmbedder {
    pub fn new(config: HttpEmbedderConfig) -> Result<Self, AnalysisError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(120))
            .build()
            .map_err(|e| AnalysisError::Backend(e.to_string()))?;
        Ok(Self { config, client })
    }

    fn try_embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, AnalysisError> {
        let request = EmbeddingRequest {
            model: &self.config.model,
            input: texts,
        };
        let mut builder = self.client.post(&self.config.endpoint).json(&request);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| AnalysisError::Backend(e.to_string()))?;
        if !response.status().is_success() {
            return Err(AnalysisError::Backend(format!(
                "http status {}",
                response.status()
            )));
        }
        let parsed: EmbeddingResponse = response
            .json()
            .map_err(|e| AnalysisError::Backend(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(AnalysisError::Backend(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        Ok(parsed
            .data
            .into_iter()
            .map(|d| normalize(d.embedding))
            .collect())
    }
}

impl EmbeddingBackend for HttpEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, AnalysisError> {
        let mut last_err = None;
        for attempt in 0..=self.config.max_retries {
            match self.try_embed(texts) {
                Ok(v) => return Ok(v),
                Err(e) => {
                    log::warn!("embedding attempt {attempt} failed: {e}");
                    last_err = Some(e);
                    std::thread::sleep(std::time::Duration::from_millis(
                        250 * (attempt as u64 + 1),
                    ));
                }
            }
        }
        Err(last_err.expect("at least one attempt"))
    }
}

/// Cosine similarity, clamped into [-1, 1] against rounding spill.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine requires equal dimensions");
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

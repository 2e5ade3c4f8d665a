use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::SemanticError;

/// Turns texts into fixed-length vectors.
pub trait Embedder: Send + Sync {
    fn model_id(&self) -> &str;
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, SemanticError>;
}

/// Deterministic bag-of-words embedder: every lowercase alphanumeric token is
/// hashed (FNV-1a) into one of `dim` signed buckets. Texts sharing words get
/// positive cosine similarity; identical texts get exactly 1.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    model: String,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim, model: format!("hash-bow-{dim}") }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(512)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl HashEmbedder {
    fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0f32; self.dim];
        let lower = text.to_lowercase();
        let mut any = false;
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let h = fnv1a(token.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
            any = true;
        }
        if !any {
            // texts without word characters still need a non-zero vector
            v[(fnv1a(lower.as_bytes()) % self.dim as u64) as usize] = 1.0;
        }
        v
    }
}

impl Embedder for HashEmbedder {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, SemanticError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Client for an OpenAI-compatible `POST {base}/v1/embeddings` endpoint.
pub struct HttpEmbedder {
    base_url: String,
    model: String,
    batch_size: usize,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f32>,
}

impl HttpEmbedder {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Result<Self, SemanticError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| SemanticError::Transport(e.to_string()))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            batch_size: 64,
            client,
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, SemanticError> {
        let url = format!("{}/v1/embeddings", self.base_url);
        let resp = self
            .client
            .post(&url)
            .json(&EmbeddingRequest { model: &self.model, input: texts })
            .send()
            .map_err(|e| SemanticError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(SemanticError::Status(status.as_u16()));
        }
        let body: EmbeddingResponse = resp.json().map_err(|e| SemanticError::Protocol(e.to_string()))?;
        if body.data.len() != texts.len() {
            return Err(SemanticError::Protocol(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                body.data.len()
            )));
        }
        let mut items = body.data;
        if items.iter().all(|i| i.index.is_some()) {
            items.sort_by_key(|i| i.index);
        }
        Ok(items.into_iter().map(|i| i.embedding).collect())
    }
}

impl Embedder for HttpEmbedder {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, SemanticError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            let mut attempt = 0;
            let vectors = loop {
                match self.embed_batch(chunk) {
                    Err(e) if e.is_retryable() && attempt < 2 => {
                        attempt += 1;
                        std::thread::sleep(Duration::from_millis(200 << attempt));
                    }
                    other => break other?,
                }
            };
            out.extend(vectors);
        }
        Ok(out)
    }
}

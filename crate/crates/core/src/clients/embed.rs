//! Text embedders used by the equation score.

use std::time::Duration;

use super::chat::{post_json, ProviderError};
use super::retry::RetryPolicy;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding provider failed after {attempts} attempt(s): {source}")]
    Provider {
        attempts: u32,
        #[source]
        source: ProviderError,
    },
    #[error("embedding configuration error: {0}")]
    Config(String),
    #[error("cannot take cosine of a zero vector")]
    ZeroVector,
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok(dot / (na * nb))
}

/// Deterministic offline embedder: signed feature hashing of token unigrams
/// and bigrams, L2-normalized. Tokens are alphanumeric runs and single
/// symbol characters, so `x^2+y` and `x ^ 2 + y` embed identically.
#[derive(Debug, Clone, Copy)]
pub struct StubEmbedder {
    pub dim: usize,
}

impl Default for StubEmbedder {
    fn default() -> Self {
        Self { dim: 64 }
    }
}

const EMPTY_TOKEN: &str = "\u{0}empty";

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn stub_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.push(c);
            continue;
        }
        if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        if !c.is_whitespace() {
            out.push(c.to_string());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

impl StubEmbedder {
    fn add(&self, v: &mut [f64], feature: &str) {
        let h = fnv1a(feature.as_bytes());
        let idx = (h % self.dim as u64) as usize;
        v[idx] += if h >> 63 == 0 { 1.0 } else { -1.0 };
    }
}

impl Embedder for StubEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        if self.dim == 0 {
            return Err(EmbedError::Config("stub dimension must be positive".into()));
        }
        let mut tokens = stub_tokens(text);
        if tokens.is_empty() {
            tokens.push(EMPTY_TOKEN.to_string());
        }
        let mut v = vec![0.0; self.dim];
        for t in &tokens {
            self.add(&mut v, t);
        }
        for w in tokens.windows(2) {
            self.add(&mut v, &format!("{}\u{1}{}", w[0], w[1]));
        }
        let mut norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // features cancelled out; fall back to hashing the whole text
            self.add(&mut v, &format!("\u{2}{text}"));
            norm = 1.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

/// OpenAI-compatible `/embeddings` endpoint. Per-token responses
/// (`token_embeddings`) are mean-pooled.
pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    dim: usize,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>, dim: usize, retry: RetryPolicy) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Self {
            endpoint: format!("{}/embeddings", base_url.trim_end_matches('/')),
            model: model.to_string(),
            api_key,
            dim,
            retry,
            agent,
        }
    }
}

fn as_vector(v: &serde_json::Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(|x| x.as_f64()).collect()
}

pub(crate) fn parse_embedding(v: &serde_json::Value) -> Result<Vec<f64>, ProviderError> {
    if let Some(e) = v.pointer("/data/0/embedding").or_else(|| v.get("embedding")) {
        return as_vector(e).ok_or_else(|| ProviderError::Fatal("embedding is not a number array".into()));
    }
    let tokens = v
        .get("token_embeddings")
        .and_then(|t| t.as_array())
        .ok_or_else(|| ProviderError::Fatal("response has no embedding".into()))?;
    let rows: Vec<Vec<f64>> = tokens
        .iter()
        .map(as_vector)
        .collect::<Option<_>>()
        .ok_or_else(|| ProviderError::Fatal("token embedding is not a number array".into()))?;
    let Some(first) = rows.first() else {
        return Err(ProviderError::Fatal("empty token embedding list".into()));
    };
    let mut mean = vec![0.0; first.len()];
    for r in &rows {
        if r.len() != mean.len() {
            return Err(ProviderError::Fatal("ragged token embeddings".into()));
        }
        mean.iter_mut().zip(r).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
    Ok(mean)
}

impl Embedder for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let body = serde_json::json!({"model": self.model, "input": text});
        let v = self
            .retry
            .run(
                || post_json(&self.agent, &self.endpoint, self.api_key.as_deref(), &body),
                |e| matches!(e, ProviderError::Transient(_)),
            )
            .map_err(|(source, attempts)| EmbedError::Provider { attempts, source })?;
        let e = parse_embedding(&v).map_err(|source| EmbedError::Provider { attempts: 1, source })?;
        if e.len() != self.dim {
            return Err(EmbedError::Config(format!(
                "embedding model returned dimension {}, configured {}",
                e.len(),
                self.dim
            )));
        }
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_basics() {
        assert!((cosine_similarity(&[1.0, 0.0], &[2.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), Err(EmbedError::ZeroVector));
        assert_eq!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(EmbedError::DimensionMismatch(1, 2))
        );
    }

    #[test]
    fn stub_is_deterministic_and_unit() {
        let e = StubEmbedder::default();
        let a = e.embed_text("E = m c^2").unwrap();
        assert_eq!(a, e.embed_text("E=m c ^ 2").unwrap());
        let n: f64 = a.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
        let empty = e.embed_text("").unwrap();
        assert_eq!(empty.len(), 64);
        assert!((cosine_similarity(&empty, &empty).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn token_disjoint_texts_are_far_on_average() {
        let e = StubEmbedder::default();
        let mut total = 0.0;
        for i in 0..200 {
            let a = e.embed_text(&format!("alpha{i} beta{i} gamma{i}")).unwrap();
            let b = e.embed_text(&format!("delta{i} eps{i} zeta{i}")).unwrap();
            total += cosine_similarity(&a, &b).unwrap();
        }
        assert!((total / 200.0).abs() < 0.2);
    }

    #[test]
    fn mean_pools_token_embeddings() {
        let v = serde_json::json!({"token_embeddings": [[1.0, 0.0], [0.0, 1.0]]});
        assert_eq!(parse_embedding(&v).unwrap(), vec![0.5, 0.5]);
        let v = serde_json::json!({"data": [{"embedding": [0.1, 0.2]}]});
        assert_eq!(parse_embedding(&v).unwrap(), vec![0.1, 0.2]);
    }

    #[test]
    fn remote_dimension_mismatch_is_config_error() {
        let base = super::super::chat::tests::serve(vec![(200, r#"{"data":[{"embedding":[1.0,2.0,3.0]}]}"#.into())]);
        let e = RemoteEmbedder::new(&base, "emb", None, 4, RetryPolicy::no_wait(0));
        assert!(matches!(e.embed_text("x"), Err(EmbedError::Config(_))));
    }
}

//! Embedding-service client: `POST {"text": ...}` → `{"vector": [...]}`.
//!
//! `embed` blocks. Inside a tokio runtime, call it from a blocking context
//! such as `tokio::task::spawn_blocking`; outside one it drives the request
//! on a private current-thread runtime.

use std::time::Duration;

use causalkg_core::vector::{EmbedError, Embedder, EmbeddingVector};
use serde::Deserialize;

#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    http: reqwest::Client,
    url: String,
    dim: usize,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(url: &str, dim: usize) -> Result<Self, EmbedError> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| EmbedError::Backend(e.to_string()))?;
        Ok(HttpEmbedder { http, url: url.to_owned(), dim })
    }

    async fn fetch(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let backend = |e: reqwest::Error| EmbedError::Backend(e.to_string());
        let resp = self.http.post(&self.url).json(&serde_json::json!({ "text": text })).send().await.map_err(backend)?;
        if !resp.status().is_success() {
            return Err(EmbedError::Backend(format!("HTTP {}", resp.status().as_u16())));
        }
        let body: EmbedResponse = resp.json().await.map_err(backend)?;
        Ok(body.vector)
    }
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let vector = match tokio::runtime::Handle::try_current() {
            Ok(handle) => handle.block_on(self.fetch(text))?,
            Err(_) => tokio::runtime::Builder::new_current_thread()
                .enable_all()
                .build()
                .map_err(|e| EmbedError::Backend(e.to_string()))?
                .block_on(self.fetch(text))?,
        };
        if vector.len() != self.dim {
            return Err(EmbedError::Backend(format!(
                "expected {} dimensions, service returned {}",
                self.dim,
                vector.len()
            )));
        }
        Ok(EmbeddingVector::new(vector)?)
    }
}

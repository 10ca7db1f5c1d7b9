//! SPARQL 1.1 Update over HTTP.

use std::time::Duration;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SparqlEndpoint {
    pub url: String,
    pub user: Option<String>,
    pub password: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum PushError {
    #[error("SPARQL endpoint unreachable: {0}")]
    Transport(String),
    #[error("SPARQL endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
}

/// Posts `update` as `application/sparql-update`; succeeds iff 2xx.
pub async fn push_to_endpoint(update: &str, endpoint: &SparqlEndpoint) -> Result<u16, PushError> {
    let http = reqwest::Client::builder()
        .timeout(Duration::from_secs(120))
        .build()
        .map_err(|e| PushError::Transport(e.to_string()))?;
    let mut rb = http
        .post(&endpoint.url)
        .header(reqwest::header::CONTENT_TYPE, "application/sparql-update")
        .body(update.to_owned());
    if let Some(user) = &endpoint.user {
        rb = rb.basic_auth(user, endpoint.password.as_deref());
    }
    let resp = rb.send().await.map_err(|e| PushError::Transport(e.to_string()))?;
    let status = resp.status();
    if status.is_success() {
        Ok(status.as_u16())
    } else {
        let body = resp.text().await.unwrap_or_default();
        Err(PushError::Status { status: status.as_u16(), body })
    }
}

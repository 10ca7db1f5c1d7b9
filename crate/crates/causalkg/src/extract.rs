//! Corpus extraction against a chat-completion endpoint.

use std::time::Duration;

use causalkg_core::chat::{ChatMessage, Role};
use causalkg_core::ontology::{build_extraction_prompt, extraction_user_message};
use causalkg_core::{AbstractRecord, ExtractionReport, OntologySpec, PromptMode};
use futures::future::BoxFuture;
use futures::stream::{self, StreamExt};

use crate::llm::{ChatCompletionClient, CompletionRequest, LlmError};

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionConfig {
    pub model: String,
    pub mode: PromptMode,
    pub temperature: f32,
    pub max_tokens: u32,
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Delay before the first retry; doubled for each later one.
    pub backoff: Duration,
    pub workers: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            model: crate::llm::DEFAULT_MODEL.into(),
            mode: PromptMode::FewShot,
            temperature: 0.0,
            max_tokens: 1024,
            max_retries: 3,
            backoff: Duration::from_secs(1),
            workers: 4,
        }
    }
}

/// Drops `<think>...</think>` blocks that reasoning models prepend.
pub fn strip_reasoning(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("<think>") {
        out.push_str(&rest[..start]);
        match rest[start..].find("</think>") {
            Some(end) => rest = &rest[start + end + "</think>".len()..],
            None => {
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Calls `op` until it succeeds or `max_retries` retries are spent.
/// Returns the result and the number of attempts made.
pub async fn with_retries<T, F, Fut>(max_retries: u32, backoff: Duration, mut op: F) -> (Result<T, LlmError>, u32)
where
    F: FnMut() -> Fut,
    Fut: std::future::Future<Output = Result<T, LlmError>>,
{
    let mut attempt = 0;
    loop {
        attempt += 1;
        match op().await {
            Ok(v) => return (Ok(v), attempt),
            Err(e) if attempt > max_retries => return (Err(e), attempt),
            Err(_) => {
                let delay = backoff.saturating_mul(1 << (attempt - 1).min(16));
                if !delay.is_zero() {
                    tokio::time::sleep(delay).await;
                }
            }
        }
    }
}

/// The request sent for one abstract.
pub fn extraction_request(record: &AbstractRecord, system_prompt: &str, cfg: &ExtractionConfig) -> CompletionRequest {
    CompletionRequest {
        model: cfg.model.clone(),
        messages: vec![
            ChatMessage::new(Role::System, system_prompt),
            ChatMessage::new(Role::User, extraction_user_message(&record.text)),
        ],
        temperature: Some(cfg.temperature),
        max_tokens: Some(cfg.max_tokens),
    }
}

/// Extracts one abstract. Never fails: an unreachable endpoint yields a
/// report that marks the abstract failed.
pub async fn extract_from_abstract(
    record: &AbstractRecord,
    client: &dyn ChatCompletionClient,
    spec: &OntologySpec,
    system_prompt: &str,
    cfg: &ExtractionConfig,
) -> ExtractionReport {
    if let Err(e) = record.validate() {
        return ExtractionReport::failed(&record.publication_id, 0, e.to_string());
    }
    let req = extraction_request(record, system_prompt, cfg);
    let (result, attempts) = with_retries(cfg.max_retries, cfg.backoff, || client.complete(req.clone())).await;
    match result {
        Ok(text) => ExtractionReport::from_completion(record, &strip_reasoning(&text), spec),
        Err(e) => ExtractionReport::failed(&record.publication_id, attempts, e.to_string()),
    }
}

/// Extracts a corpus with up to `cfg.workers` requests in flight. The
/// merged report keeps corpus order.
pub fn extract_corpus<'a>(
    corpus: &'a [AbstractRecord],
    client: &'a dyn ChatCompletionClient,
    spec: &'a OntologySpec,
    cfg: &'a ExtractionConfig,
) -> BoxFuture<'a, ExtractionReport> {
    Box::pin(async move {
        let prompt = build_extraction_prompt(spec, cfg.mode);
        let prompt = prompt.as_str();
        let pending: Vec<_> = corpus.iter().map(|r| extract_from_abstract(r, client, spec, prompt, cfg)).collect();
        let reports: Vec<ExtractionReport> = stream::iter(pending).buffered(cfg.workers.max(1)).collect().await;
        ExtractionReport::merged(reports)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ScriptEntry, ScriptedClient};
    use std::sync::atomic::{AtomicU32, Ordering};

    const EXAMPLE_OUTPUT: &str = "{'relation_type': 'affect', 'entity1_type': 'disease', 'entity1_name': 'AMD', 'entity2_type': 'body_part', 'entity2_name': 'retina'}\n{'relation_type': 'cause', 'entity1_type': 'disease', 'entity1_name': 'AMD', 'entity2_type': 'symptom', 'entity2_name': 'vision loss'}";

    fn rec(id: &str, text: &str) -> AbstractRecord {
        AbstractRecord { publication_id: id.into(), text: text.into(), source_url: None }
    }

    fn cfg() -> ExtractionConfig {
        ExtractionConfig { backoff: Duration::ZERO, ..Default::default() }
    }

    fn script(entries: &[(&str, &str, u32)]) -> ScriptedClient {
        ScriptedClient::new(
            entries
                .iter()
                .map(|(c, r, f)| ScriptEntry { contains: (*c).into(), response: (*r).into(), fail_times: *f })
                .collect(),
        )
    }

    #[tokio::test]
    async fn worked_example_gives_two_relations() {
        let c = script(&[("AMD affects the retina", EXAMPLE_OUTPUT, 0)]);
        let r = extract_corpus(&[rec("NCT1", "AMD affects the retina and causes vision loss.")], &c, &OntologySpec::default(), &cfg()).await;
        assert_eq!(r.relation_count, 2);
        assert!(r.relations.iter().all(|x| x.publication_id == "NCT1"));
    }

    #[tokio::test]
    async fn prose_gives_failures_only() {
        let c = script(&[("x", "I could not find any relations.", 0)]);
        let r = extract_corpus(&[rec("P", "x")], &c, &OntologySpec::default(), &cfg()).await;
        assert_eq!(r.relation_count, 0);
        assert!(!r.parse_failures.is_empty());
    }

    #[tokio::test]
    async fn retry_contract() {
        let calls = AtomicU32::new(0);
        let (r, attempts) = with_retries(3, Duration::ZERO, || {
            let n = calls.fetch_add(1, Ordering::SeqCst);
            async move { if n < 2 { Err(LlmError::Transport("down".into())) } else { Ok(n) } }
        })
        .await;
        assert_eq!(r, Ok(2));
        assert_eq!(attempts, 3);
        let (r, attempts) = with_retries(3, Duration::ZERO, || async { Err::<(), _>(LlmError::Transport("down".into())) }).await;
        assert!(r.is_err());
        assert_eq!(attempts, 4);
    }

    #[tokio::test(start_paused = true)]
    async fn backoff_doubles() {
        let start = tokio::time::Instant::now();
        let _ = with_retries(3, Duration::from_secs(1), || async { Err::<(), _>(LlmError::Transport("x".into())) }).await;
        assert_eq!(start.elapsed(), Duration::from_secs(1 + 2 + 4));
    }

    #[tokio::test]
    async fn corpus_order_and_failures() {
        let c = script(&[
            ("first", EXAMPLE_OUTPUT, 0),
            ("second", "", 99),
            ("third", "{'relation_type': 'treat', 'entity1_type': 'treatment', 'entity1_name': 'ranibizumab', 'entity2_type': 'disease', 'entity2_name': 'AMD'}", 1),
        ]);
        let corpus = [rec("A", "first"), rec("B", "second"), rec("C", "third")];
        let r = extract_corpus(&corpus, &c, &OntologySpec::default(), &ExtractionConfig { workers: 3, ..cfg() }).await;
        assert_eq!(r.abstract_count, 3);
        let ids: Vec<&str> = r.relations.iter().map(|x| x.publication_id.as_str()).collect();
        assert_eq!(ids, ["A", "A", "C"]);
        assert_eq!(r.failed_abstracts.len(), 1);
        assert_eq!(r.failed_abstracts[0].publication_id, "B");
        assert_eq!(r.failed_abstracts[0].attempts, 4);
        assert_eq!(extract_corpus(&[], &c, &OntologySpec::default(), &cfg()).await, ExtractionReport::default());
    }

    #[test]
    fn reasoning_is_stripped() {
        assert_eq!(strip_reasoning("<think>hmm {x}</think>\n{a}"), "\n{a}");
        assert_eq!(strip_reasoning("a<think>b"), "a");
        assert_eq!(strip_reasoning("plain"), "plain");
    }
}

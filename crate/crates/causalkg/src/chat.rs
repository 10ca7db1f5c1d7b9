//! One chat turn: retrieve evidence, build the prompt, stream the answer
//! through the trial-id linkifier and record the exchange.

use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use causalkg_core::chat::{build_rag_prompt, StreamLinkifier};
use causalkg_core::context::{retrieve, ContextBlock, EvidenceRow};
use causalkg_core::graph::Vocabulary;
use causalkg_core::vector::Embedder;
use causalkg_core::{ChatSession, GraphStore, RetrievalConfig, VectorIndex};
use futures::StreamExt;
use serde::Serialize;

use crate::llm::{ChatCompletionClient, CompletionRequest, LlmError};

pub type SharedEmbedder = Arc<dyn Embedder + Send + Sync>;

/// Read-only data a chat turn retrieves from.
#[derive(Debug)]
pub struct KnowledgeBase {
    pub store: GraphStore,
    pub index: VectorIndex,
    pub vocab: Vocabulary,
}

impl KnowledgeBase {
    pub fn new(mut store: GraphStore, index: VectorIndex, vocab: Vocabulary) -> Self {
        store.seal();
        KnowledgeBase { store, index, vocab }
    }
}

#[derive(Clone)]
pub struct ChatDeps {
    pub kb: Arc<KnowledgeBase>,
    pub embedder: SharedEmbedder,
    pub llm: Arc<dyn ChatCompletionClient>,
    pub retrieval: RetrievalConfig,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatOutcome {
    pub text: String,
    pub evidence: Vec<EvidenceRow>,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChatError {
    #[error("retrieval failed: {0}")]
    Retrieval(String),
    #[error("language model failed: {0}")]
    Llm(#[from] LlmError),
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

pub async fn retrieve_context(deps: &ChatDeps, question: &str) -> Result<ContextBlock, ChatError> {
    let kb = deps.kb.clone();
    let embedder = deps.embedder.clone();
    let cfg = deps.retrieval;
    let q = question.to_owned();
    tokio::task::spawn_blocking(move || retrieve(&q, &kb.index, embedder.as_ref(), &kb.store, &kb.vocab, &cfg))
        .await
        .map_err(|e| ChatError::Retrieval(e.to_string()))?
        .map_err(|e| ChatError::Retrieval(e.to_string()))
}

/// Runs one turn. `on_chunk` receives linkified text; the chunks
/// concatenate to the returned text. On failure the question stays in the
/// history without an answer.
pub async fn run_chat(
    deps: &ChatDeps,
    session: &mut ChatSession,
    question: &str,
    mut on_chunk: impl FnMut(&str),
) -> Result<ChatOutcome, ChatError> {
    let started = Instant::now();
    let context = retrieve_context(deps, question).await;
    let prompt = context.as_ref().ok().map(|c| build_rag_prompt(c, session, question));
    session.push_user(question, now_ms());
    let (context, prompt) = (context?, prompt.expect("built when retrieval succeeded"));

    let req = CompletionRequest {
        model: deps.model.clone(),
        messages: prompt.to_messages(),
        temperature: None,
        max_tokens: None,
    };
    let mut deltas = deps.llm.stream(req);
    let mut linkifier = StreamLinkifier::new();
    let mut text = String::new();
    while let Some(delta) = deltas.next().await {
        let out = linkifier.push(&delta?);
        if !out.is_empty() {
            on_chunk(&out);
            text.push_str(&out);
        }
    }
    let tail = linkifier.finish();
    if !tail.is_empty() {
        on_chunk(&tail);
        text.push_str(&tail);
    }
    session
        .push_assistant(text.clone(), now_ms())
        .expect("the question was just recorded");
    Ok(ChatOutcome { text, evidence: context.evidence, elapsed_ms: started.elapsed().as_millis() as u64 })
}

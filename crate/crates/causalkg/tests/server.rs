mod common;

use std::sync::Arc;

use causalkg::chat::{ChatDeps, KnowledgeBase};
use causalkg::extract::{extract_corpus, ExtractionConfig};
use causalkg::llm::{ChatCompletionClient, CompletionRequest, DeltaStream, LlmError, MockChatClient, ScriptedClient};
use causalkg::pipeline::relations_to_store;
use causalkg::server::{router, AppState};
use causalkg_core::graph::Vocabulary;
use causalkg_core::refinement::refine;
use causalkg_core::vector::{embed_and_index_graph, DEFAULT_DIM};
use causalkg_core::{FallbackEmbedder, OntologySpec, RetrievalConfig};
use common::*;
use futures::future::BoxFuture;
use futures::StreamExt;
use serde_json::{json, Value};
use tokio::sync::Semaphore;

fn scripted() -> Arc<ScriptedClient> {
    Arc::new(ScriptedClient::from_json(&std::fs::read_to_string(fixture("mock_extraction.json")).unwrap()).unwrap())
}

async fn deps(llm: Arc<dyn ChatCompletionClient>) -> ChatDeps {
    let spec = OntologySpec::default();
    let corpus = causalkg::io::read_corpus(&fixture("corpus.jsonl")).unwrap();
    let cfg = ExtractionConfig { backoff: std::time::Duration::ZERO, ..Default::default() };
    let report = extract_corpus(&corpus, scripted().as_ref(), &spec, &cfg).await;
    let (relations, _) = refine(&report, &spec);
    let store = relations_to_store(&relations, &spec);
    let vocab = Vocabulary::for_spec(&spec);
    let embedder = Arc::new(FallbackEmbedder::new(DEFAULT_DIM).unwrap());
    let index = embed_and_index_graph(&store, &vocab, embedder.as_ref()).unwrap();
    ChatDeps {
        kb: Arc::new(KnowledgeBase::new(store, index, vocab)),
        embedder,
        llm,
        retrieval: RetrievalConfig::default(),
        model: "mock".into(),
    }
}

async fn serve(state: AppState) -> (String, Arc<AppState>) {
    let state = Arc::new(state);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(state.clone());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}"), state)
}

async fn mock_server(sessions: Option<std::path::PathBuf>) -> (String, Arc<AppState>) {
    let d = deps(Arc::new(MockChatClient::new(5, None))).await;
    let extraction = ExtractionConfig { backoff: std::time::Duration::ZERO, ..Default::default() };
    serve(AppState::new(Arc::new(OntologySpec::default()), d, Some(scripted()), extraction, sessions)).await
}

#[tokio::test(flavor = "multi_thread")]
async fn chat_streams_and_records_history() {
    let (base, state) = mock_server(None).await;
    let (status, events, _) = post_chat(&base, json!({"session_id": "s1", "question": "What treats neovascular AMD?"})).await;
    assert_eq!(status, 200);
    assert!(events.iter().filter(|e| e.event == "chunk").count() > 1);
    let (text, done) = split_events(&events);
    let done = done.expect("done event");
    assert_eq!(text, done["text"].as_str().unwrap());
    assert_eq!(done["session_id"], "s1");
    assert!(text.contains("[NCT99000002](https://app.dimensions.ai/details/clinical_trial/NCT99000002)"));

    let kb = state.knowledge_base();
    let rows = kb.store.relation_rows(&kb.vocab);
    for ev in done["evidence"].as_array().unwrap() {
        assert!(rows.iter().any(|r| r.relation == ev["relation"].as_str().unwrap()), "{ev}");
        assert!(!ev["publication_id"].as_str().unwrap().is_empty());
    }

    let s: Value = reqwest::get(format!("{base}/api/session/s1")).await.unwrap().json().await.unwrap();
    let h = s["history"].as_array().unwrap();
    assert_eq!(h.len(), 2);
    assert_eq!(h[0]["role"], "user");
    assert_eq!(h[1]["role"], "assistant");
    assert_eq!(h[1]["text"], done["text"]);
}

#[tokio::test(flavor = "multi_thread")]
async fn session_id_is_generated_when_missing() {
    let (base, _) = mock_server(None).await;
    let (_, events, _) = post_chat(&base, json!({"question": "AMD?"})).await;
    let (_, done) = split_events(&events);
    let id = done.unwrap()["session_id"].as_str().unwrap().to_owned();
    assert_eq!(id.len(), 36);
    assert_eq!(reqwest::get(format!("{base}/api/session/{id}")).await.unwrap().status(), 200);
}

#[tokio::test(flavor = "multi_thread")]
async fn bad_requests() {
    let (base, _) = mock_server(None).await;
    let client = reqwest::Client::new();
    for body in ["not json", "{}", r#"{"question": "  "}"#, r#"{"question": "x", "extra": 1}"#, r#"{"question": "x", "session_id": "a/b"}"#] {
        let r = client.post(format!("{base}/api/chat")).body(body).send().await.unwrap();
        assert_eq!(r.status(), 400, "{body}");
        let v: Value = r.json().await.unwrap();
        assert!(v["error"].is_string());
    }
    assert_eq!(reqwest::get(format!("{base}/api/session/nobody")).await.unwrap().status(), 404);
    let h: Value = reqwest::get(format!("{base}/api/health")).await.unwrap().json().await.unwrap();
    assert_eq!(h["status"], "ok");
    assert!(h["triple_count"].as_u64().unwrap() > 0);
}

/// Streams one delta, then waits for a permit before finishing.
struct Gated {
    gate: Arc<Semaphore>,
}

impl ChatCompletionClient for Gated {
    fn complete(&self, _req: CompletionRequest) -> BoxFuture<'static, Result<String, LlmError>> {
        Box::pin(async { Ok(String::new()) })
    }

    fn stream(&self, _req: CompletionRequest) -> DeltaStream {
        let gate = self.gate.clone();
        let tail = futures::stream::once(async move {
            gate.acquire().await.unwrap().forget();
            Ok::<_, LlmError>(" world".to_owned())
        });
        futures::stream::iter([Ok("hello".to_owned())]).chain(tail).boxed()
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_turn_on_same_session_is_rejected() {
    let gate = Arc::new(Semaphore::new(0));
    let d = deps(Arc::new(Gated { gate: gate.clone() })).await;
    let (base, _) = serve(AppState::new(Arc::new(OntologySpec::default()), d, None, ExtractionConfig::default(), None)).await;

    let first = tokio::spawn({
        let base = base.clone();
        async move { post_chat(&base, json!({"session_id": "busy", "question": "AMD?"})).await }
    });
    // Wait until the first turn holds the session.
    let mut status = 0;
    for _ in 0..100 {
        let (s, _, _) = post_chat(&base, json!({"session_id": "busy", "question": "again"})).await;
        status = s;
        if s == 409 {
            break;
        }
        tokio::time::sleep(std::time::Duration::from_millis(20)).await;
    }
    assert_eq!(status, 409);
    // Another session is independent of the busy one.
    let second = tokio::spawn({
        let base = base.clone();
        async move { post_chat(&base, json!({"session_id": "other", "question": "AMD?"})).await }
    });
    tokio::time::sleep(std::time::Duration::from_millis(50)).await;
    gate.add_permits(2);
    for task in [first, second] {
        let (status, events, _) = task.await.unwrap();
        assert_eq!(status, 200);
        assert_eq!(split_events(&events).0, "hello world");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn sessions_persist_to_files() {
    let dir = tempfile::tempdir().unwrap();
    {
        let (base, _) = mock_server(Some(dir.path().to_owned())).await;
        post_chat(&base, json!({"session_id": "keep", "question": "AMD retina"})).await;
    }
    assert!(dir.path().join("keep.json").exists());
    let (base, _) = mock_server(Some(dir.path().to_owned())).await;
    let s: Value = reqwest::get(format!("{base}/api/session/keep")).await.unwrap().json().await.unwrap();
    assert_eq!(s["history"].as_array().unwrap().len(), 2);
    let (_, events, _) = post_chat(&base, json!({"session_id": "keep", "question": "and drusen?"})).await;
    let (text, _) = split_events(&events);
    assert!(text.contains("Earlier exchanges considered: 1."), "{text}");
}

#[tokio::test(flavor = "multi_thread")]
async fn ingest_grows_the_graph() {
    let (base, state) = mock_server(None).await;
    let before = state.knowledge_base().store.len();
    let corpus = r#"{"publication_id": "NCT99000004", "text": "Smoking is a major risk factor that causes geographic atrophy."}"#;
    let extra = format!("{}\n{corpus}\n", std::fs::read_to_string(fixture("corpus.jsonl")).unwrap());
    let r = reqwest::Client::new().post(format!("{base}/api/ingest")).body(extra).send().await.unwrap();
    assert_eq!(r.status(), 200);
    let v: Value = r.json().await.unwrap();
    assert_eq!(v["abstracts"], 4);
    let after = state.knowledge_base().store.len();
    assert_eq!(v["triple_count"].as_u64().unwrap() as usize, after);
    assert!(after > before);
    assert_eq!(v["index_size"].as_u64().unwrap() as usize, state.knowledge_base().index.len());

    let r = reqwest::Client::new().post(format!("{base}/api/ingest")).body("nope").send().await.unwrap();
    assert_eq!(r.status(), 400);
}

#[tokio::test(flavor = "multi_thread")]
async fn ingest_without_extractor_is_unavailable() {
    let d = deps(Arc::new(MockChatClient::new(5, None))).await;
    let (base, _) = serve(AppState::new(Arc::new(OntologySpec::default()), d, None, ExtractionConfig::default(), None)).await;
    let r = reqwest::Client::new().post(format!("{base}/api/ingest")).body("").send().await.unwrap();
    assert_eq!(r.status(), 503);
}

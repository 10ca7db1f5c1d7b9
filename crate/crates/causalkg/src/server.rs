//! HTTP service.
//!
//! - `POST /api/chat` `{"session_id"?, "question"}`: server-sent events
//!   `chunk` `{"delta"}`, then `done` `{"text", "evidence", "elapsed_ms",
//!   "session_id"}` or `error` `{"message"}`
//! - `GET /api/health`: `{"status", "index_size", "triple_count"}`
//! - `GET /api/session/{id}`: the session and its history
//! - `POST /api/ingest`: a JSON Lines corpus; runs extraction through
//!   indexing and swaps in the enlarged graph

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use causalkg_core::refinement::refine;
use causalkg_core::vector::embed_and_index_graph;
use causalkg_core::{ChatSession, GraphStore, OntologySpec};
use futures::stream::{self, Stream};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::mpsc;

use crate::chat::{now_ms, run_chat, ChatDeps, KnowledgeBase};
use crate::extract::{extract_corpus, ExtractionConfig};
use crate::llm::ChatCompletionClient;
use crate::pipeline::relations_to_store;

type Shared<T> = Arc<tokio::sync::Mutex<T>>;

pub struct AppState {
    pub spec: Arc<OntologySpec>,
    kb: RwLock<Arc<KnowledgeBase>>,
    pub deps: ChatDeps,
    pub extractor: Option<Arc<dyn ChatCompletionClient>>,
    pub extraction: ExtractionConfig,
    sessions: Mutex<HashMap<String, Shared<ChatSession>>>,
    sessions_dir: Option<PathBuf>,
    ingest_lock: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn new(
        spec: Arc<OntologySpec>,
        deps: ChatDeps,
        extractor: Option<Arc<dyn ChatCompletionClient>>,
        extraction: ExtractionConfig,
        sessions_dir: Option<PathBuf>,
    ) -> Self {
        AppState {
            spec,
            kb: RwLock::new(deps.kb.clone()),
            deps,
            extractor,
            extraction,
            sessions: Mutex::new(HashMap::new()),
            sessions_dir,
            ingest_lock: tokio::sync::Mutex::new(()),
        }
    }

    pub fn knowledge_base(&self) -> Arc<KnowledgeBase> {
        self.kb.read().expect("kb lock").clone()
    }

    fn session_file(&self, id: &str) -> Option<PathBuf> {
        self.sessions_dir.as_ref().map(|d| d.join(format!("{id}.json")))
    }

    fn load_session(&self, id: &str) -> Option<ChatSession> {
        let text = std::fs::read_to_string(self.session_file(id)?).ok()?;
        let s: ChatSession = serde_json::from_str(&text).ok()?;
        ChatSession::from_parts(s.session_id.clone(), s.created_at, s.history().to_vec()).ok()
    }

    fn persist(&self, session: &ChatSession) {
        if let Some(path) = self.session_file(&session.session_id) {
            let text = serde_json::to_string_pretty(session).expect("sessions serialize");
            if let Err(e) = crate::io::write_bytes(&path, text.as_bytes()) {
                eprintln!("{}", json!({"warning": "session not persisted", "message": e.to_string()}));
            }
        }
    }

    /// The session with `id`, created if unknown.
    fn session(&self, id: &str) -> Shared<ChatSession> {
        let mut map = self.sessions.lock().expect("session map");
        if let Some(s) = map.get(id) {
            return s.clone();
        }
        let s = self.load_session(id).unwrap_or_else(|| ChatSession::new(id, now_ms()));
        let s = Arc::new(tokio::sync::Mutex::new(s));
        map.insert(id.to_owned(), s.clone());
        s
    }

    fn existing_session(&self, id: &str) -> Option<Shared<ChatSession>> {
        if let Some(s) = self.sessions.lock().expect("session map").get(id) {
            return Some(s.clone());
        }
        self.load_session(id)?;
        Some(self.session(id))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/chat", post(chat))
        .route("/api/health", get(health))
        .route("/api/session/{id}", get(session))
        .route("/api/ingest", post(ingest))
        .with_state(state)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn valid_session_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChatRequest {
    #[serde(default)]
    session_id: Option<String>,
    question: String,
}

async fn chat(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: ChatRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed request body: {e}")),
    };
    if req.question.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "question must not be empty");
    }
    let id = req.session_id.unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
    if !valid_session_id(&id) {
        return error(StatusCode::BAD_REQUEST, "session_id must be 1-64 characters of [A-Za-z0-9_-]");
    }
    let Ok(guard) = state.session(&id).try_lock_owned() else {
        return error(StatusCode::CONFLICT, "session busy: a chat is already in flight for this session");
    };

    let (tx, rx) = mpsc::unbounded_channel::<Event>();
    let mut deps = state.deps.clone();
    deps.kb = state.knowledge_base();
    tokio::spawn(async move {
        let mut session = guard;
        let chunk_tx = tx.clone();
        let result = run_chat(&deps, &mut session, &req.question, |delta| {
            let _ = chunk_tx.send(Event::default().event("chunk").data(json!({ "delta": delta }).to_string()));
        })
        .await;
        let event = match result {
            Ok(out) => Event::default().event("done").data(
                json!({
                    "text": out.text,
                    "evidence": out.evidence,
                    "elapsed_ms": out.elapsed_ms,
                    "session_id": session.session_id,
                })
                .to_string(),
            ),
            Err(e) => Event::default().event("error").data(json!({ "message": e.to_string() }).to_string()),
        };
        state.persist(&session);
        drop(session);
        let _ = tx.send(event);
    });
    Sse::new(events(rx)).keep_alive(KeepAlive::default()).into_response()
}

fn events(rx: mpsc::UnboundedReceiver<Event>) -> impl Stream<Item = Result<Event, Infallible>> {
    stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|e| (Ok(e), rx)) })
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    let kb = state.knowledge_base();
    Json(json!({ "status": "ok", "index_size": kb.index.len(), "triple_count": kb.store.len() })).into_response()
}

async fn session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    if !valid_session_id(&id) {
        return error(StatusCode::BAD_REQUEST, "invalid session id");
    }
    let Some(s) = state.existing_session(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown session `{id}`"));
    };
    let Ok(s) = s.try_lock() else {
        return error(StatusCode::CONFLICT, "session busy");
    };
    Json(json!({ "session_id": s.session_id, "created_at": s.created_at, "history": s.history() })).into_response()
}

async fn ingest(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let Some(extractor) = state.extractor.clone() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no extraction endpoint configured");
    };
    let text = match std::str::from_utf8(&body) {
        Ok(t) => t,
        Err(_) => return error(StatusCode::BAD_REQUEST, "corpus must be UTF-8 JSON Lines"),
    };
    let corpus = match crate::io::parse_corpus(text) {
        Ok(c) => c,
        Err((line, msg)) => return error(StatusCode::BAD_REQUEST, format!("corpus line {line}: {msg}")),
    };
    let _one_at_a_time = state.ingest_lock.lock().await;
    let report = extract_corpus(&corpus, extractor.as_ref(), &state.spec, &state.extraction).await;
    let (relations, stats) = refine(&report, &state.spec);
    let added = relations_to_store(&relations, &state.spec);

    let old = state.knowledge_base();
    let mut store: GraphStore = old.store.iter().collect();
    let before = store.len();
    store.extend(added.iter()).expect("fresh store is unsealed");
    let vocab = old.vocab.clone();
    let embedder = state.deps.embedder.clone();
    let built = tokio::task::spawn_blocking(move || {
        let index = embed_and_index_graph(&store, &vocab, embedder.as_ref());
        index.map(|index| KnowledgeBase::new(store, index, vocab))
    })
    .await;
    let kb = match built {
        Ok(Ok(kb)) => Arc::new(kb),
        Ok(Err(e)) => return error(StatusCode::BAD_GATEWAY, format!("indexing failed: {e}")),
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };
    let body = json!({
        "abstracts": report.abstract_count,
        "relations": report.relation_count,
        "parse_failures": report.parse_failures.len(),
        "failed_abstracts": report.failed_abstracts,
        "refinement": stats,
        "triples_added": kb.store.len() - before,
        "triple_count": kb.store.len(),
        "index_size": kb.index.len(),
    });
    *state.kb.write().expect("kb lock") = kb;
    Json(body).into_response()
}

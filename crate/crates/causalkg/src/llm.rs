//! Chat-completion clients.
//!
//! [`OpenAiClient`] speaks the OpenAI-style `POST {base}/chat/completions`
//! protocol (Ollama, vLLM, llama.cpp server and hosted APIs all accept it).
//! The mocks are deterministic and need no network.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use bytes::Bytes;
use causalkg_core::chat::ChatMessage;
use futures::future::BoxFuture;
use futures::stream::{self, BoxStream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULT_MODEL: &str = "deepseek-r1:7b";
pub const DEFAULT_BASE_URL: &str = "http://localhost:11434/v1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

pub type DeltaStream = BoxStream<'static, Result<String, LlmError>>;

pub trait ChatCompletionClient: Send + Sync {
    /// Whole completion text.
    fn complete(&self, req: CompletionRequest) -> BoxFuture<'static, Result<String, LlmError>>;

    /// Completion as text deltas. Connection errors arrive as the first item.
    fn stream(&self, req: CompletionRequest) -> DeltaStream;
}

#[derive(Debug, Clone)]
pub struct OpenAiClient {
    http: reqwest::Client,
    url: String,
    api_key: Option<String>,
}

impl OpenAiClient {
    pub fn new(base_url: &str, api_key: Option<String>) -> Self {
        OpenAiClient {
            http: reqwest::Client::new(),
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
        }
    }

    fn request(&self, req: &CompletionRequest, stream: bool) -> reqwest::RequestBuilder {
        let mut body = serde_json::to_value(req).expect("requests serialize");
        body["stream"] = Value::Bool(stream);
        let mut rb = self.http.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            rb = rb.bearer_auth(key);
        }
        rb
    }
}

async fn send(rb: reqwest::RequestBuilder) -> Result<reqwest::Response, LlmError> {
    let resp = rb.send().await.map_err(|e| LlmError::Transport(e.to_string()))?;
    let status = resp.status();
    if !status.is_success() {
        let body = resp.text().await.unwrap_or_default();
        return Err(LlmError::Status { status: status.as_u16(), body });
    }
    Ok(resp)
}

fn message_content(v: &Value) -> Result<String, LlmError> {
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| LlmError::Protocol("missing choices[0].message.content".into()))
}

impl ChatCompletionClient for OpenAiClient {
    fn complete(&self, req: CompletionRequest) -> BoxFuture<'static, Result<String, LlmError>> {
        let rb = self.request(&req, false);
        Box::pin(async move {
            let resp = send(rb).await?;
            let v: Value = resp.json().await.map_err(|e| LlmError::Protocol(e.to_string()))?;
            message_content(&v)
        })
    }

    fn stream(&self, req: CompletionRequest) -> DeltaStream {
        let rb = self.request(&req, true);
        stream::once(send(rb))
            .map(|r| match r {
                Ok(resp) => sse_deltas(resp.bytes_stream().map(|b| b.map_err(|e| LlmError::Transport(e.to_string()))).boxed()),
                Err(e) => stream::iter([Err(e)]).boxed(),
            })
            .flatten()
            .boxed()
    }
}

/// Incremental parser for an OpenAI streaming body: `data: {json}` events
/// separated by blank lines, ending with `data: [DONE]`.
#[derive(Debug, Default)]
pub struct SseParser {
    buf: Vec<u8>,
    done: bool,
}

impl SseParser {
    /// Feeds bytes, returning the content deltas of every completed line.
    pub fn feed(&mut self, bytes: &[u8]) -> Result<Vec<String>, LlmError> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        while let Some(nl) = self.buf.iter().position(|b| *b == b'\n') {
            let line: Vec<u8> = self.buf.drain(..=nl).collect();
            if let Some(delta) = self.line(&line)? {
                out.push(delta);
            }
        }
        Ok(out)
    }

    /// Handles a final unterminated line.
    pub fn finish(&mut self) -> Result<Vec<String>, LlmError> {
        let rest = std::mem::take(&mut self.buf);
        Ok(self.line(&rest)?.into_iter().collect())
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    fn line(&mut self, raw: &[u8]) -> Result<Option<String>, LlmError> {
        let line = std::str::from_utf8(raw).map_err(|_| LlmError::Protocol("stream is not UTF-8".into()))?;
        let line = line.trim_end_matches(['\n', '\r']);
        let Some(data) = line.strip_prefix("data:") else {
            return Ok(None);
        };
        let data = data.trim_start();
        if data == "[DONE]" {
            self.done = true;
            return Ok(None);
        }
        if self.done {
            return Ok(None);
        }
        let v: Value = serde_json::from_str(data).map_err(|e| LlmError::Protocol(format!("bad event: {e}")))?;
        if let Some(err) = v.get("error") {
            return Err(LlmError::Protocol(err.to_string()));
        }
        Ok(v.pointer("/choices/0/delta/content").and_then(Value::as_str).filter(|s| !s.is_empty()).map(str::to_owned))
    }
}

fn sse_deltas(body: BoxStream<'static, Result<Bytes, LlmError>>) -> DeltaStream {
    struct St {
        body: BoxStream<'static, Result<Bytes, LlmError>>,
        parser: SseParser,
        queue: VecDeque<Result<String, LlmError>>,
        ended: bool,
    }
    let st = St { body, parser: SseParser::default(), queue: VecDeque::new(), ended: false };
    stream::unfold(st, |mut st| async move {
        loop {
            if let Some(item) = st.queue.pop_front() {
                return Some((item, st));
            }
            if st.ended {
                return None;
            }
            match st.body.next().await {
                Some(Ok(bytes)) => match st.parser.feed(&bytes) {
                    Ok(ds) => st.queue.extend(ds.into_iter().map(Ok)),
                    Err(e) => {
                        st.queue.push_back(Err(e));
                        st.ended = true;
                    }
                },
                Some(Err(e)) => {
                    st.queue.push_back(Err(e));
                    st.ended = true;
                }
                None => {
                    st.ended = true;
                    match st.parser.finish() {
                        Ok(ds) => st.queue.extend(ds.into_iter().map(Ok)),
                        Err(e) => st.queue.push_back(Err(e)),
                    }
                    if !st.parser.is_done() && st.queue.iter().all(Result::is_ok) {
                        st.queue.push_back(Err(LlmError::Transport("stream ended before [DONE]".into())));
                    }
                }
            }
        }
    })
    .boxed()
}

/// One scripted response: used when the user message contains `contains`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub contains: String,
    #[serde(default)]
    pub response: String,
    /// Fail this many calls with a transport error before answering.
    #[serde(default)]
    pub fail_times: u32,
}

/// Extraction mock: answers from a script keyed on abstract text.
#[derive(Debug)]
pub struct ScriptedClient {
    entries: Vec<ScriptEntry>,
    failures_left: Mutex<Vec<u32>>,
}

impl ScriptedClient {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        let failures_left = Mutex::new(entries.iter().map(|e| e.fail_times).collect());
        ScriptedClient { entries, failures_left }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(text)?))
    }

    fn answer(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        let user = req.messages.iter().rev().find(|m| m.role == causalkg_core::Role::User);
        let text = user.map(|m| m.content.as_str()).unwrap_or("");
        let Some(i) = self.entries.iter().position(|e| text.contains(&e.contains)) else {
            return Ok(String::new());
        };
        let mut left = self.failures_left.lock().expect("mock state");
        if left[i] > 0 {
            left[i] -= 1;
            return Err(LlmError::Transport(format!("scripted failure for `{}`", self.entries[i].contains)));
        }
        Ok(self.entries[i].response.clone())
    }
}

impl ChatCompletionClient for ScriptedClient {
    fn complete(&self, req: CompletionRequest) -> BoxFuture<'static, Result<String, LlmError>> {
        let r = self.answer(&req);
        Box::pin(async move { r })
    }

    fn stream(&self, req: CompletionRequest) -> DeltaStream {
        let r = self.answer(&req);
        stream::iter([r]).boxed()
    }
}

/// Chat mock: restates the evidence lines of the system prompt with raw
/// trial ids and streams the answer in small chunks, so ids get split
/// across chunks. Optionally records every request it receives.
#[derive(Debug)]
pub struct MockChatClient {
    chunk_chars: usize,
    capture: Option<PathBuf>,
    capture_lock: Mutex<()>,
}

impl MockChatClient {
    pub fn new(chunk_chars: usize, capture: Option<PathBuf>) -> Self {
        MockChatClient { chunk_chars: chunk_chars.max(1), capture, capture_lock: Mutex::new(()) }
    }

    pub fn capture_path(&self) -> Option<&Path> {
        self.capture.as_deref()
    }

    fn record(&self, req: &CompletionRequest) -> Result<(), LlmError> {
        let Some(path) = &self.capture else { return Ok(()) };
        use std::io::Write;
        let _g = self.capture_lock.lock().expect("capture lock");
        let line = serde_json::to_string(&req.messages).expect("messages serialize");
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| writeln!(f, "{line}"))
            .map_err(|e| LlmError::Transport(format!("capture: {e}")))
    }

    /// The deterministic answer for a request.
    pub fn compose(req: &CompletionRequest) -> String {
        let system = req.messages.iter().find(|m| m.role == causalkg_core::Role::System);
        let question = req.messages.iter().rev().find(|m| m.role == causalkg_core::Role::User);
        let facts: Vec<String> = system
            .map(|m| m.content.as_str())
            .unwrap_or("")
            .lines()
            .filter_map(|l| l.strip_prefix("- "))
            .filter_map(|l| {
                let (fact, source) = l.rsplit_once(" (source: ")?;
                let (subject, rest) = fact.split_once(" —[")?;
                let (predicate, object) = rest.split_once("]→ ")?;
                Some(format!("{subject} {predicate} {object} (see {}).", source.trim_end_matches(')')))
            })
            .collect();
        let prior = req.messages.len().saturating_sub(2) / 2;
        let mut out = format!(
            "Question: {}\n",
            question.map(|m| m.content.trim()).unwrap_or("")
        );
        if facts.is_empty() {
            out.push_str("No additional references were found in the knowledge graph for this question.");
        } else {
            out.push_str("According to the knowledge graph:\n");
            for f in &facts {
                out.push_str(f);
                out.push('\n');
            }
            out.push_str("These statements come from the cited clinical trials.");
        }
        if prior > 0 {
            out.push_str(&format!("\n(Earlier exchanges considered: {prior}.)"));
        }
        out
    }
}

impl ChatCompletionClient for MockChatClient {
    fn complete(&self, req: CompletionRequest) -> BoxFuture<'static, Result<String, LlmError>> {
        let r = self.record(&req).map(|_| Self::compose(&req));
        Box::pin(async move { r })
    }

    fn stream(&self, req: CompletionRequest) -> DeltaStream {
        if let Err(e) = self.record(&req) {
            return stream::iter([Err(e)]).boxed();
        }
        let chars: Vec<char> = Self::compose(&req).chars().collect();
        let chunks: Vec<Result<String, LlmError>> =
            chars.chunks(self.chunk_chars).map(|c| Ok(c.iter().collect())).collect();
        stream::iter(chunks).boxed()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use causalkg_core::Role;

    fn req(user: &str) -> CompletionRequest {
        CompletionRequest {
            model: "m".into(),
            messages: vec![ChatMessage::new(Role::System, "sys"), ChatMessage::new(Role::User, user)],
            temperature: Some(0.0),
            max_tokens: Some(16),
        }
    }

    #[test]
    fn sse_parsing_across_splits() {
        let body = "data: {\"choices\":[{\"delta\":{\"content\":\"Hel\"}}]}\n\n: keepalive\ndata: {\"choices\":[{\"delta\":{\"content\":\"lo\"}}]}\r\n\ndata: {\"choices\":[{\"delta\":{}}]}\n\ndata: [DONE]\n\n";
        for split in 0..body.len() {
            let mut p = SseParser::default();
            let mut got = p.feed(&body.as_bytes()[..split]).unwrap();
            got.extend(p.feed(&body.as_bytes()[split..]).unwrap());
            got.extend(p.finish().unwrap());
            assert_eq!(got.concat(), "Hello");
            assert!(p.is_done());
        }
    }

    #[test]
    fn sse_error_event() {
        let mut p = SseParser::default();
        assert!(p.feed(b"data: {\"error\":{\"message\":\"x\"}}\n").is_err());
        assert!(p.feed(b"data: not json\n").is_err());
    }

    #[test]
    fn request_body_shape() {
        let v = serde_json::to_value(req("hi")).unwrap();
        assert_eq!(v["messages"][0]["role"], "system");
        assert_eq!(v["messages"][1]["content"], "hi");
        assert_eq!(v["temperature"], 0.0);
        assert_eq!(v["max_tokens"], 16);
    }

    #[tokio::test]
    async fn scripted_failures_then_answer() {
        let c = ScriptedClient::new(vec![ScriptEntry { contains: "retina".into(), response: "R".into(), fail_times: 2 }]);
        assert!(c.complete(req("the retina")).await.is_err());
        assert!(c.complete(req("the retina")).await.is_err());
        assert_eq!(c.complete(req("the retina")).await.unwrap(), "R");
        assert_eq!(c.complete(req("other")).await.unwrap(), "");
    }

    #[tokio::test]
    async fn mock_chat_is_deterministic_and_chunked() {
        let mut r = req("why?");
        r.messages[0].content = "Evidence:\n- smoking —[cause]→ cataract (source: NCT99000001)\n".into();
        let c = MockChatClient::new(7, None);
        let chunks: Vec<String> = c.stream(r.clone()).map(|c| c.unwrap()).collect().await;
        assert!(chunks.iter().all(|c| c.chars().count() <= 7));
        let text = chunks.concat();
        assert_eq!(text, c.complete(r).await.unwrap());
        assert!(text.contains("smoking cause cataract (see NCT99000001)."));
    }
}

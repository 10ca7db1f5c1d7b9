#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub const BIN: &str = env!("CARGO_BIN_EXE_causalkg");
pub const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

pub fn fixture(name: &str) -> PathBuf {
    Path::new(FIXTURES).join(name)
}

pub fn causalkg(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_clear()
        .env("PATH", std::env::var_os("PATH").unwrap_or_default())
        .output()
        .expect("run causalkg")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Artifacts of the offline `extract → refine → load → index` run.
pub struct Built {
    pub raw: PathBuf,
    pub refined: PathBuf,
    pub graph: PathBuf,
    pub snapshot: PathBuf,
}

fn ok(o: Output, step: &str) -> Output {
    assert!(o.status.success(), "{step} failed: {}\n{}", stderr(&o), stdout(&o));
    o
}

pub fn build_pipeline(dir: &Path) -> Built {
    let p = |n: &str| dir.join(n);
    let b = Built { raw: p("raw.json"), refined: p("refined.jsonl"), graph: p("graph.nt"), snapshot: p("index.kgv") };
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    let corpus = s(&fixture("corpus.jsonl"));
    ok(causalkg(&["extract", "--mock", "--corpus", &corpus, "--out", &s(&b.raw), "--backoff-ms", "0"]), "extract");
    ok(causalkg(&["refine", "--in", &s(&b.raw), "--out", &s(&b.refined)]), "refine");
    ok(causalkg(&["load", "--in", &s(&b.refined), "--export", &s(&b.graph)]), "load");
    ok(causalkg(&["index", "--graph", &s(&b.graph), "--snapshot", &s(&b.snapshot), "--fallback-embedder"]), "index");
    b
}

/// A `serve --mock` child process, killed on drop.
pub struct Server {
    child: Child,
    pub base: String,
}

impl Server {
    pub fn start(built: &Built, extra: &[&str]) -> Server {
        let mut child = Command::new(BIN)
            .args(["serve", "--mock", "--bind", "127.0.0.1:0", "--graph"])
            .arg(&built.graph)
            .arg("--snapshot")
            .arg(&built.snapshot)
            .args(extra)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).expect("read banner");
        let base = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("banner: {line:?}")).to_owned();
        Server { child, base }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SseEvent {
    pub event: String,
    pub data: serde_json::Value,
}

/// Splits a complete `text/event-stream` body into events, skipping comments.
pub fn parse_sse(body: &str) -> Vec<SseEvent> {
    let mut out = Vec::new();
    for block in body.replace("\r\n", "\n").split("\n\n") {
        let mut event = String::from("message");
        let mut data = Vec::new();
        for line in block.lines() {
            if let Some(v) = line.strip_prefix("event:") {
                event = v.trim_start().to_owned();
            } else if let Some(v) = line.strip_prefix("data:") {
                data.push(v.strip_prefix(' ').unwrap_or(v));
            }
        }
        if !data.is_empty() {
            let data = serde_json::from_str(&data.join("\n")).expect("event data is JSON");
            out.push(SseEvent { event, data });
        }
    }
    out
}

/// Posts to `/api/chat` and returns the status and parsed events.
pub async fn post_chat(base: &str, body: serde_json::Value) -> (u16, Vec<SseEvent>, String) {
    let resp = reqwest::Client::new().post(format!("{base}/api/chat")).json(&body).send().await.expect("chat request");
    let status = resp.status().as_u16();
    let text = resp.text().await.expect("chat body");
    let events = if status == 200 { parse_sse(&text) } else { Vec::new() };
    (status, events, text)
}

/// Concatenated `chunk` deltas and the `done` payload.
pub fn split_events(events: &[SseEvent]) -> (String, Option<serde_json::Value>) {
    let mut text = String::new();
    let mut done = None;
    for e in events {
        match e.event.as_str() {
            "chunk" => text.push_str(e.data["delta"].as_str().expect("delta")),
            "done" => done = Some(e.data.clone()),
            _ => {}
        }
    }
    (text, done)
}

//! The `causalkg` command line.
//!
//! Exit codes: 0 success, 2 usage error, 3 input error, 4 transport error.
//! Failures print one JSON object on one line to stderr.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use causalkg_core::graph::{check_integrity, to_sparql_insert, Vocabulary};
use causalkg_core::ontology::build_extraction_prompt;
use causalkg_core::refinement::refine;
use causalkg_core::vector::{embed_and_index_graph, DocClass, DEFAULT_DIM};
use causalkg_core::{ChatSession, ExtractionReport, OntologySpec, PromptMode, RetrievalConfig};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::chat::{run_chat, ChatDeps, KnowledgeBase};
use crate::config::FileConfig;
use crate::extract::{extract_corpus, ExtractionConfig};
use crate::llm::{ChatCompletionClient, MockChatClient, OpenAiClient, ScriptedClient, DEFAULT_BASE_URL, DEFAULT_MODEL};
use crate::ontology_file::load_ontology_path;
use crate::pipeline::{make_embedder, relations_to_store};
use crate::server::{router, AppState};
use crate::sparql_push::{push_to_endpoint, SparqlEndpoint};

pub const DEFAULT_FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
/// Characters per streamed chunk from the mock chat model.
pub const MOCK_CHUNK_CHARS: usize = 7;

#[derive(Debug, Parser)]
#[command(name = "causalkg", version, about = "Causal knowledge-graph RAG over AMD abstracts")]
pub struct Cli {
    /// TOML config file.
    #[arg(long, env = "CONFIG", global = true)]
    pub config: Option<PathBuf>,
    /// Ontology spec file; the built-in causal AMD ontology when omitted.
    #[arg(long, global = true)]
    pub ontology: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the extraction prompt generated from the ontology.
    Prompt {
        #[arg(long, default_value = "few")]
        mode: PromptMode,
    },
    /// Extract relations from a JSON Lines corpus.
    Extract {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "PROMPT_MODE")]
        mode: Option<PromptMode>,
        #[command(flatten)]
        endpoint: EndpointArgs,
        #[command(flatten)]
        mock: MockArgs,
    },
    /// Normalize, type-resolve and deduplicate an extraction report.
    Refine {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write refinement statistics (default: OUT.stats.json).
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Build the RDF graph, export N-Triples, optionally push to a SPARQL endpoint.
    Load {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        export: PathBuf,
        #[arg(long, env = "SPARQL_ENDPOINT")]
        endpoint: Option<String>,
        #[arg(long, env = "SPARQL_USER")]
        sparql_user: Option<String>,
        #[arg(long, env = "SPARQL_PASSWORD", hide_env_values = true)]
        sparql_password: Option<String>,
    },
    /// Embed graph nodes and write a vector index snapshot.
    Index {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        snapshot: PathBuf,
        #[command(flatten)]
        embed: EmbedArgs,
    },
    /// Answer one question from the command line.
    Ask {
        #[arg(long)]
        question: String,
        #[command(flatten)]
        serving: ServingArgs,
    },
    /// Run the HTTP chat service.
    Serve {
        #[arg(long, env = "BIND_ADDR")]
        bind: Option<String>,
        /// Keep one JSON file per session here.
        #[arg(long, env = "SESSIONS_DIR")]
        sessions_dir: Option<PathBuf>,
        #[command(flatten)]
        serving: ServingArgs,
        #[command(flatten)]
        endpoint: EndpointArgs,
    },
}

#[derive(Debug, Args)]
pub struct EndpointArgs {
    /// Chat-completion base URL for extraction.
    #[arg(long, env = "ENDPOINT_URL")]
    pub endpoint_url: Option<String>,
    #[arg(long, env = "MODEL_NAME")]
    pub model: Option<String>,
    #[arg(long, env = "MAX_RETRIES")]
    pub max_retries: Option<u32>,
    /// Delay before the first retry, in milliseconds.
    #[arg(long, env = "BACKOFF_MS")]
    pub backoff_ms: Option<u64>,
    #[arg(long, env = "WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MockArgs {
    /// Use scripted model responses and the offline embedder.
    #[arg(long)]
    pub mock: bool,
    /// Directory holding mock responses.
    #[arg(long, env = "FIXTURES_DIR")]
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long, env = "EMBED_URL")]
    pub embed_url: Option<String>,
    #[arg(long, env = "FALLBACK_EMBEDDER", value_parser = clap::builder::BoolishValueParser::new(), num_args = 0..=1, default_missing_value = "true")]
    pub fallback_embedder: Option<bool>,
    #[arg(long, env = "EMBED_DIM")]
    pub dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServingArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long, env = "LLM_URL")]
    pub llm_url: Option<String>,
    #[arg(long, env = "LLM_MODEL")]
    pub llm_model: Option<String>,
    #[arg(long, env = "K_ENTITIES")]
    pub k_entities: Option<usize>,
    #[arg(long, env = "K_RELATIONS")]
    pub k_relations: Option<usize>,
    /// Append every request the mock chat model receives to this file.
    #[arg(long)]
    pub capture_prompts: Option<PathBuf>,
    #[command(flatten)]
    pub embed: EmbedArgs,
    #[command(flatten)]
    pub mock: MockArgs,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Transport(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Transport(_) => 4,
        }
    }

    pub fn to_json_line(&self) -> String {
        let (kind, message) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Input(m) => ("input", m),
            CliError::Transport(m) => ("transport", m),
        };
        json!({ "error": kind, "message": message }).to_string()
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

struct Ctx {
    file: FileConfig,
    spec: OntologySpec,
}

impl Ctx {
    fn load(cli: &Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(p) => FileConfig::load(p).map_err(CliError::Input)?,
            None => FileConfig::default(),
        };
        let spec = match cli.ontology.as_ref().or(file.ontology.as_ref()) {
            Some(p) => load_ontology_path(p).map_err(input)?,
            None => OntologySpec::default(),
        };
        Ok(Ctx { file, spec })
    }

    fn fixtures(&self, m: &MockArgs) -> PathBuf {
        m.fixtures.clone().or_else(|| self.file.fixtures.clone()).unwrap_or_else(|| DEFAULT_FIXTURES.into())
    }

    fn extraction_config(&self, e: &EndpointArgs, mode: Option<PromptMode>) -> Result<ExtractionConfig, CliError> {
        let f = &self.file.extraction;
        let d = ExtractionConfig::default();
        let mode = match (mode, &f.mode) {
            (Some(m), _) => m,
            (None, Some(s)) => s.parse().map_err(CliError::Input)?,
            (None, None) => d.mode,
        };
        Ok(ExtractionConfig {
            model: e.model.clone().or_else(|| f.model.clone()).unwrap_or(d.model),
            mode,
            temperature: f.temperature.unwrap_or(d.temperature),
            max_tokens: f.max_tokens.unwrap_or(d.max_tokens),
            max_retries: e.max_retries.or(f.max_retries).unwrap_or(d.max_retries),
            backoff: e.backoff_ms.or(f.backoff_ms).map(Duration::from_millis).unwrap_or(d.backoff),
            workers: e.workers.or(f.workers).unwrap_or(d.workers).max(1),
        })
    }

    fn extraction_client(&self, e: &EndpointArgs, m: &MockArgs) -> Result<Arc<dyn ChatCompletionClient>, CliError> {
        if m.mock {
            let path = self.fixtures(m).join("mock_extraction.json");
            let text = crate::io::read_text(&path).map_err(input)?;
            let client = ScriptedClient::from_json(&text).map_err(|e| input(format!("{}: {e}", path.display())))?;
            return Ok(Arc::new(client));
        }
        let url = e.endpoint_url.clone().or_else(|| self.file.extraction.endpoint_url.clone());
        let url = url.ok_or_else(|| CliError::Usage("no extraction endpoint: pass --endpoint-url or --mock".into()))?;
        Ok(Arc::new(OpenAiClient::new(&url, std::env::var("API_KEY").ok())))
    }

    fn retrieval(&self, s: &ServingArgs) -> Result<RetrievalConfig, CliError> {
        let mut r = self.file.retrieval;
        if let Some(k) = s.k_entities {
            r.k_entities = k;
        }
        if let Some(k) = s.k_relations {
            r.k_relations = k;
        }
        r.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(r)
    }

    fn embed_settings(&self, e: &EmbedArgs, mock: bool) -> (Option<String>, bool, usize) {
        let s = &self.file.serve;
        let url = e.embed_url.clone().or_else(|| s.embed_url.clone());
        let fallback = mock || e.fallback_embedder.or(s.fallback_embedder).unwrap_or(false);
        let dim = e.dim.or(s.embed_dim).unwrap_or(DEFAULT_DIM);
        (url, fallback, dim)
    }

    fn chat_deps(&self, s: &ServingArgs) -> Result<ChatDeps, CliError> {
        let store = crate::io::read_graph(&s.graph).map_err(input)?;
        let index = crate::io::read_snapshot(&s.snapshot).map_err(input)?;
        let vocab = Vocabulary::for_spec(&self.spec);
        let (url, fallback, _) = self.embed_settings(&s.embed, s.mock.mock);
        let embedder = make_embedder(url.as_deref(), fallback, index.dim()).map_err(input)?;
        let llm: Arc<dyn ChatCompletionClient> = if s.mock.mock {
            Arc::new(MockChatClient::new(MOCK_CHUNK_CHARS, s.capture_prompts.clone()))
        } else {
            let url = s.llm_url.clone().or_else(|| self.file.serve.llm_url.clone()).unwrap_or(DEFAULT_BASE_URL.into());
            Arc::new(OpenAiClient::new(&url, std::env::var("API_KEY").ok()))
        };
        let model = s.llm_model.clone().or_else(|| self.file.serve.llm_model.clone()).unwrap_or(DEFAULT_MODEL.into());
        Ok(ChatDeps {
            kb: Arc::new(KnowledgeBase::new(store, index, vocab)),
            embedder,
            llm,
            retrieval: self.retrieval(s)?,
            model,
        })
    }
}

fn print_json(v: serde_json::Value) {
    println!("{v}");
}

fn stats_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".stats.json");
    s.into()
}

pub async fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx::load(&cli)?;
    match cli.command {
        Command::Prompt { mode } => {
            print!("{}", build_extraction_prompt(&ctx.spec, mode));
        }
        Command::Extract { corpus, out, mode, endpoint, mock } => {
            let records = crate::io::read_corpus(&corpus).map_err(input)?;
            let cfg = ctx.extraction_config(&endpoint, mode)?;
            let client = ctx.extraction_client(&endpoint, &mock)?;
            let report = extract_corpus(&records, client.as_ref(), &ctx.spec, &cfg).await;
            crate::io::write_json(&out, &report).map_err(input)?;
            print_json(json!({
                "abstracts": report.abstract_count,
                "relations": report.relation_count,
                "parse_failures": report.parse_failures.len(),
                "failed_abstracts": report.failed_abstracts.len(),
            }));
            if !records.is_empty() && report.failed_abstracts.len() == records.len() {
                return Err(CliError::Transport(format!(
                    "every abstract failed; first error: {}",
                    report.failed_abstracts[0].error
                )));
            }
        }
        Command::Refine { input: path, out, stats } => {
            let empty = std::fs::metadata(&path).map(|m| m.len() == 0).unwrap_or(false);
            let report = if empty { ExtractionReport::default() } else { crate::io::read_report(&path).map_err(input)? };
            let (relations, st) = refine(&report, &ctx.spec);
            crate::io::write_refined(&out, &relations).map_err(input)?;
            crate::io::write_json(&stats.unwrap_or_else(|| stats_path(&out)), &st).map_err(input)?;
            print_json(serde_json::to_value(st).expect("stats serialize"));
        }
        Command::Load { input: path, export, endpoint, sparql_user, sparql_password } => {
            let relations = crate::io::read_refined(&path, &ctx.spec).map_err(input)?;
            let store = relations_to_store(&relations, &ctx.spec);
            let vocab = Vocabulary::for_spec(&ctx.spec);
            let count = check_integrity(&store, &vocab).map_err(|p| input(p.join("; ")))?;
            crate::io::write_graph(&export, &store).map_err(input)?;
            let s = &ctx.file.sparql;
            let mut pushed = None;
            if let Some(url) = endpoint.or_else(|| s.endpoint.clone()) {
                let ep = SparqlEndpoint {
                    url,
                    user: sparql_user.or_else(|| s.user.clone()),
                    password: sparql_password.or_else(|| s.password.clone()),
                };
                let update = to_sparql_insert(&store.to_vec());
                let status = push_to_endpoint(&update, &ep).await.map_err(|e| CliError::Transport(e.to_string()))?;
                pushed = Some(status);
            }
            print_json(json!({ "relations": count, "triples": store.len(), "pushed_status": pushed }));
        }
        Command::Index { graph, snapshot, embed } => {
            let store = crate::io::read_graph(&graph).map_err(input)?;
            let vocab = Vocabulary::for_spec(&ctx.spec);
            let (url, fallback, dim) = ctx.embed_settings(&embed, false);
            if url.is_none() && !fallback {
                return Err(CliError::Usage("no embedder: pass --embed-url or --fallback-embedder".into()));
            }
            let embedder = make_embedder(url.as_deref(), fallback, dim).map_err(input)?;
            let index = tokio::task::spawn_blocking(move || embed_and_index_graph(&store, &vocab, embedder.as_ref()))
                .await
                .map_err(|e| CliError::Transport(e.to_string()))?
                .map_err(|e| CliError::Transport(e.to_string()))?;
            crate::io::write_snapshot(&snapshot, &index).map_err(input)?;
            print_json(json!({
                "documents": index.len(),
                "entities": index.count(DocClass::Entity),
                "relations": index.count(DocClass::Relation),
                "publications": index.count(DocClass::Publication),
                "dim": index.dim(),
            }));
        }
        Command::Ask { question, serving } => {
            let deps = ctx.chat_deps(&serving)?;
            let mut session = ChatSession::new("cli", crate::chat::now_ms());
            let out = run_chat(&deps, &mut session, &question, |_| {})
                .await
                .map_err(|e| CliError::Transport(e.to_string()))?;
            println!("{}", out.text);
        }
        Command::Serve { bind, sessions_dir, serving, endpoint } => {
            let deps = ctx.chat_deps(&serving)?;
            let extraction = ctx.extraction_config(&endpoint, None)?;
            let has_endpoint = endpoint.endpoint_url.is_some() || ctx.file.extraction.endpoint_url.is_some();
            let extractor = if serving.mock.mock || has_endpoint {
                Some(ctx.extraction_client(&endpoint, &serving.mock)?)
            } else {
                None
            };
            let bind = bind.or_else(|| ctx.file.serve.bind_addr.clone()).unwrap_or(DEFAULT_BIND.into());
            let addr: SocketAddr = bind.parse().map_err(|e| CliError::Usage(format!("bind address `{bind}`: {e}")))?;
            let sessions_dir = sessions_dir.or_else(|| ctx.file.serve.sessions_dir.clone());
            let state = Arc::new(AppState::new(Arc::new(ctx.spec), deps, extractor, extraction, sessions_dir));
            let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::Transport(e.to_string()))?;
            let local = listener.local_addr().map_err(|e| CliError::Transport(e.to_string()))?;
            println!("listening on http://{local}");
            axum::serve(listener, router(state))
                .with_graceful_shutdown(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
                .map_err(|e| CliError::Transport(e.to_string()))?;
        }
    }
    Ok(())
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args(args: impl IntoIterator<Item = std::ffi::OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let msg = e.kind().to_string();
            let detail = e.render().to_string();
            let first = detail.lines().find(|l| !l.trim().is_empty()).unwrap_or(&msg).trim_start_matches("error: ");
            eprintln!("{}", CliError::Usage(first.to_owned()).to_json_line());
            return 2;
        }
    };
    let rt = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("{}", CliError::Transport(e.to_string()).to_json_line());
            return 4;
        }
    };
    match rt.block_on(run(cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            e.exit_code()
        }
    }
}

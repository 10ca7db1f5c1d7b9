//! Runtime side of causalkg: spec and artifact files, chat-completion and
//! embedding clients, corpus extraction, SPARQL push, the streaming chat
//! server and the `causalkg` command line.

pub mod chat;
pub mod cli;
pub mod config;
pub mod embed_http;
pub mod extract;
pub mod io;
pub mod llm;
pub mod ontology_file;
pub mod pipeline;
pub mod server;
pub mod sparql_push;

pub use causalkg_core as core;

//! Core of the causal knowledge-graph RAG pipeline.
//!
//! Everything here is pure computation over in-memory values and builds
//! without `std`: the ontology and the extraction prompt generated from it,
//! the relation-output parser and validator, refinement, RDF triple
//! generation with N-Triples and SPARQL Update serialization, the exact
//! cosine vector index, evidence context assembly, the chat prompt and
//! trial-id hyperlinking. File IO, HTTP and the CLI live in the `causalkg`
//! crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod chat;
pub mod context;
pub mod extraction;
pub mod graph;
pub mod ontology;
pub mod refinement;
pub mod vector;

pub use chat::{ChatMessage, ChatSession, Role};
pub use context::{ContextBlock, EvidenceRow, RetrievalConfig};
pub use extraction::{
    AbstractRecord, ExtractionReport, ParseFailure, RawRelation, ValidatedRelation,
};
pub use graph::{GraphStore, Iri, Literal, Term, Triple};
pub use ontology::{EntityType, OntologyDocument, OntologySpec, PromptMode, RelationType};
pub use refinement::{RefinedRelation, RefinementStats};
pub use vector::{EmbeddingVector, Embedder, FallbackEmbedder, SearchHit, VectorIndex};

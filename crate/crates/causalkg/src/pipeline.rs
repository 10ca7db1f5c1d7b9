//! Stage functions shared by the CLI and the server.

use std::sync::Arc;

use causalkg_core::graph::relation_to_triples;
use causalkg_core::vector::{EmbedError, FallbackEmbedder};
use causalkg_core::{GraphStore, OntologySpec, RefinedRelation};

use crate::chat::SharedEmbedder;
use crate::embed_http::HttpEmbedder;

pub fn relations_to_store(relations: &[RefinedRelation], spec: &OntologySpec) -> GraphStore {
    relations.iter().flat_map(|r| relation_to_triples(r, spec)).collect()
}

/// The configured embedder: the HTTP service when a URL is given and the
/// fallback is not forced, otherwise the offline hashing embedder.
pub fn make_embedder(embed_url: Option<&str>, force_fallback: bool, dim: usize) -> Result<SharedEmbedder, EmbedError> {
    match embed_url {
        Some(url) if !force_fallback => Ok(Arc::new(HttpEmbedder::new(url, dim)?)),
        _ => Ok(Arc::new(FallbackEmbedder::new(dim)?)),
    }
}

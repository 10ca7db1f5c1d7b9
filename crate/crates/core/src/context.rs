//! Query-time evidence assembly: entity matching, one-hop relation
//! expansion through the graph, and budgeted plain-text rendering.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::{GraphStore, RelationRow, Vocabulary};
use crate::vector::{DocClass, Document, EmbedError, Embedder, VectorError, VectorIndex};

/// Rendered in place of evidence when nothing was retrieved.
pub const NO_REFERENCES_MARKER: &str =
    "No relations found: no reference data was found in the knowledge graph for this question.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub k_entities: usize,
    pub k_relations: usize,
    pub min_score: f64,
    pub max_context_chars: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig { k_entities: 5, k_relations: 10, min_score: 0.0, max_context_chars: 4000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("min_score must lie in [-1, 1]")]
    MinScore,
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k_entities == 0 {
            return Err(ConfigError::ZeroCount("k_entities"));
        }
        if self.k_relations == 0 {
            return Err(ConfigError::ZeroCount("k_relations"));
        }
        if !(-1.0..=1.0).contains(&self.min_score) {
            return Err(ConfigError::MinScore);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RetrievalError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("query embedding failed: {0}")]
    Embed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMatch {
    pub iri: String,
    pub name: String,
    #[serde(rename = "type")]
    pub entity_type: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub relation: String,
    pub predicate: String,
    pub subject: String,
    pub object: String,
    pub publication_id: String,
}

impl EvidenceRow {
    pub fn render(&self) -> String {
        format!(
            "{} —[{}]→ {} (source: {})",
            self.subject, self.predicate, self.object, self.publication_id
        )
    }
}

impl From<RelationRow> for EvidenceRow {
    fn from(r: RelationRow) -> Self {
        EvidenceRow {
            relation: r.relation,
            predicate: r.predicate,
            subject: r.subject,
            object: r.object,
            publication_id: r.publication_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub matched_entities: Vec<EntityMatch>,
    /// Only the rows that made it into `rendered`.
    pub evidence: Vec<EvidenceRow>,
    pub rendered: String,
}

impl ContextBlock {
    pub fn empty() -> Self {
        render_context(&[], &[], &RetrievalConfig::default())
    }
}

/// Entities most similar to `query`, best first. An empty query (one with
/// nothing embeddable) matches nothing.
pub fn match_entities(
    query: &str,
    index: &VectorIndex,
    embedder: &dyn Embedder,
    cfg: &RetrievalConfig,
) -> Result<Vec<EntityMatch>, RetrievalError> {
    cfg.validate()?;
    if index.is_empty() {
        return Ok(Vec::new());
    }
    let q = match embedder.embed(query) {
        Ok(q) => q,
        Err(EmbedError::EmptyText) => return Ok(Vec::new()),
        Err(EmbedError::Vector(e)) => return Err(e.into()),
        Err(EmbedError::Backend(e)) => return Err(RetrievalError::Embed(e)),
    };
    let hits = index.search(&q, cfg.k_entities, Some(DocClass::Entity))?;
    Ok(hits
        .into_iter()
        .filter(|h| h.score >= cfg.min_score)
        .filter_map(|h| match &index.get(&h.id)?.doc {
            Document::Entity(e) => Some(EntityMatch {
                iri: h.id.clone(),
                name: e.name.clone(),
                entity_type: e.entity_type.clone(),
                score: h.score,
            }),
            _ => None,
        })
        .collect())
}

/// Relations touching any matched entity, ordered by the rank of the first
/// entity that reaches them and then by relation IRI, deduplicated and
/// capped at `k_relations` overall.
pub fn gather_relations(
    entities: &[EntityMatch],
    store: &GraphStore,
    v: &Vocabulary,
    cfg: &RetrievalConfig,
) -> Vec<EvidenceRow> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for e in entities {
        for row in store.query_relations_for_entity(v, &e.name, usize::MAX) {
            if out.len() == cfg.k_relations {
                return out;
            }
            if seen.insert(row.relation.clone()) {
                out.push(EvidenceRow::from(row));
            }
        }
    }
    out
}

fn push_line(text: &mut String, used: &mut usize, line: &str, budget: usize) -> bool {
    let n = line.chars().count() + 1;
    if *used + n > budget {
        return false;
    }
    text.push_str(line);
    text.push('\n');
    *used += n;
    true
}

/// Renders matched entities, then evidence lines, within
/// `max_context_chars` (counted in chars), cutting only at line ends.
/// Evidence claims the budget first, then the no-references marker, then
/// entities.
pub fn render_context(
    entities: &[EntityMatch],
    evidence: &[EvidenceRow],
    cfg: &RetrievalConfig,
) -> ContextBlock {
    let budget = cfg.max_context_chars;
    let mut used = 0;

    let mut ev_text = String::new();
    let mut kept = Vec::new();
    if !evidence.is_empty() && push_line(&mut ev_text, &mut used, "Evidence:", budget) {
        for row in evidence {
            if !push_line(&mut ev_text, &mut used, &format!("- {}", row.render()), budget) {
                break;
            }
            kept.push(row.clone());
        }
        if kept.is_empty() {
            ev_text.clear();
            used = 0;
        }
    }
    if kept.is_empty() {
        push_line(&mut ev_text, &mut used, NO_REFERENCES_MARKER, budget);
    }

    let mut ent_text = String::new();
    let mut shown = Vec::new();
    if !entities.is_empty() && push_line(&mut ent_text, &mut used, "Matched entities:", budget) {
        for e in entities {
            let line = format!("- {} ({})", e.name, e.entity_type);
            if !push_line(&mut ent_text, &mut used, &line, budget) {
                break;
            }
            shown.push(e.clone());
        }
        if shown.is_empty() {
            ent_text.clear();
        }
    }

    ent_text.push_str(&ev_text);
    ContextBlock { matched_entities: shown, evidence: kept, rendered: ent_text }
}

/// Full retrieval: match, expand and render.
pub fn retrieve(
    query: &str,
    index: &VectorIndex,
    embedder: &dyn Embedder,
    store: &GraphStore,
    v: &Vocabulary,
    cfg: &RetrievalConfig,
) -> Result<ContextBlock, RetrievalError> {
    let entities = match_entities(query, index, embedder, cfg)?;
    let evidence = gather_relations(&entities, store, v, cfg);
    Ok(render_context(&entities, &evidence, cfg))
}

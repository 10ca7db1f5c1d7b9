//! Exact cosine top-k search over entity, relation and publication documents.
//!
//! Search is a full scan. Scores are computed in `f64` as
//! `dot(a, b) / (|a| * |b|)` clamped to `[-1, 1]`; hits are ordered by score
//! descending, then id ascending.

mod build;
mod embed;
mod snapshot;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

pub use build::{embed_and_index_graph, entity_text, relation_text};
pub use embed::{EmbedError, Embedder, FallbackEmbedder, DEFAULT_DIM};
pub use snapshot::{decode_snapshot, encode_snapshot, SnapshotError, SNAPSHOT_MAGIC};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VectorError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("vector component {0} is not finite")]
    NonFinite(usize),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("index dimension must be at least 1")]
    InvalidDimension,
    #[error("relation {relation} references unindexed publication {publication}")]
    DanglingReference { relation: String, publication: String },
}

/// Fixed-length vector of finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, VectorError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(VectorError::NonFinite(i));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|v| v * v).sum())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, VectorError> {
        Self::new(self.0.iter().map(|v| v * factor).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn score_from(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    let s = (dot / (norm_a * norm_b)).clamp(-1.0, 1.0);
    // Fold -0.0 into 0.0 so ordering ties behave.
    s + 0.0
}

/// Cosine similarity. Symmetric bit-for-bit.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, VectorError> {
    if a.dim() != b.dim() {
        return Err(VectorError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    if a.is_zero() || b.is_zero() {
        return Err(VectorError::ZeroVector);
    }
    Ok(score_from(dot(&a.0, &b.0), a.norm(), b.norm()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DocClass {
    Entity,
    Relation,
    Publication,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntityDoc {
    pub name: String,
    pub entity_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelationDoc {
    pub predicate: String,
    pub subject: String,
    pub object: String,
    /// Id of the [`PublicationDoc`] this relation was derived from.
    pub publication: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PublicationDoc {
    pub publication_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Document {
    Entity(EntityDoc),
    Relation(RelationDoc),
    Publication(PublicationDoc),
}

impl Document {
    pub fn class(&self) -> DocClass {
        match self {
            Document::Entity(_) => DocClass::Entity,
            Document::Relation(_) => DocClass::Relation,
            Document::Publication(_) => DocClass::Publication,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub id: String,
    pub score: f64,
    pub class: DocClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedDoc {
    pub id: String,
    pub doc: Document,
    pub vector: EmbeddingVector,
    norm: f64,
}

/// In-memory vector index. Build it, then share it read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    docs: Vec<IndexedDoc>,
    by_id: BTreeMap<String, usize>,
}

impl VectorIndex {
    pub fn new(dim: usize) -> Result<Self, VectorError> {
        if dim == 0 {
            return Err(VectorError::InvalidDimension);
        }
        Ok(VectorIndex { dim, docs: Vec::new(), by_id: BTreeMap::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn count(&self, class: DocClass) -> usize {
        self.docs.iter().filter(|d| d.doc.class() == class).count()
    }

    /// Documents in insertion order.
    pub fn docs(&self) -> &[IndexedDoc] {
        &self.docs
    }

    /// Adds a document; an existing id is replaced in place.
    pub fn insert(
        &mut self,
        id: impl Into<String>,
        doc: Document,
        vector: EmbeddingVector,
    ) -> Result<(), VectorError> {
        if vector.dim() != self.dim {
            return Err(VectorError::DimensionMismatch { expected: self.dim, got: vector.dim() });
        }
        if vector.is_zero() {
            return Err(VectorError::ZeroVector);
        }
        let id = id.into();
        let norm = vector.norm();
        let entry = IndexedDoc { id: id.clone(), doc, vector, norm };
        match self.by_id.get(&id) {
            Some(&i) => self.docs[i] = entry,
            None => {
                self.by_id.insert(id, self.docs.len());
                self.docs.push(entry);
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&IndexedDoc> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    /// The `k` best documents (optionally of one class) for `query`.
    pub fn search(
        &self,
        query: &EmbeddingVector,
        k: usize,
        class: Option<DocClass>,
    ) -> Result<Vec<SearchHit>, VectorError> {
        if k == 0 {
            return Err(VectorError::InvalidK);
        }
        if self.docs.is_empty() {
            return Ok(Vec::new());
        }
        if query.dim() != self.dim {
            return Err(VectorError::DimensionMismatch { expected: self.dim, got: query.dim() });
        }
        if query.is_zero() {
            return Err(VectorError::ZeroVector);
        }
        let qnorm = query.norm();
        let mut hits: Vec<SearchHit> = self
            .docs
            .iter()
            .filter(|d| class.is_none_or(|c| d.doc.class() == c))
            .map(|d| SearchHit {
                id: d.id.clone(),
                score: score_from(dot(&query.0, &d.vector.0), qnorm, d.norm),
                class: d.doc.class(),
            })
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
        hits.truncate(k);
        Ok(hits)
    }

    /// Every relation's publication reference resolves to an indexed publication.
    pub fn check_references(&self) -> Result<(), VectorError> {
        for d in &self.docs {
            if let Document::Relation(r) = &d.doc {
                let ok = matches!(self.get(&r.publication), Some(p) if p.doc.class() == DocClass::Publication);
                if !ok {
                    return Err(VectorError::DanglingReference {
                        relation: d.id.clone(),
                        publication: r.publication.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

//! Index construction from a loaded graph.

use alloc::format;
use alloc::string::String;

use super::{
    Document, EmbedError, Embedder, EmbeddingVector, EntityDoc, PublicationDoc, RelationDoc,
    VectorIndex,
};
use crate::graph::{EntityNode, GraphStore, RelationRow, Vocabulary};

pub fn entity_text(e: &EntityDoc) -> String {
    format!("{} ({})", e.name, e.entity_type)
}

pub fn relation_text(r: &RelationDoc) -> String {
    format!("{} {} {}", r.subject, r.predicate, r.object)
}

/// Rounds to `f32` so the in-memory index equals its decoded snapshot.
fn quantize(v: EmbeddingVector) -> Result<EmbeddingVector, EmbedError> {
    Ok(EmbeddingVector::new(v.values().iter().map(|x| f64::from(*x as f32)).collect())?)
}

fn entity_doc(n: &EntityNode) -> EntityDoc {
    EntityDoc { name: n.name.clone(), entity_type: n.entity_type.clone() }
}

fn relation_doc(r: &RelationRow, publication: String) -> RelationDoc {
    RelationDoc {
        predicate: r.predicate.clone(),
        subject: r.subject.clone(),
        object: r.object.clone(),
        publication,
    }
}

/// Embeds every publication, entity and relation node of `store`, keyed by
/// node IRI. Publications go first, then entities, then relations, each in
/// IRI order, so the result (and its snapshot) is deterministic.
pub fn embed_and_index_graph(
    store: &GraphStore,
    v: &Vocabulary,
    embedder: &dyn Embedder,
) -> Result<VectorIndex, EmbedError> {
    let mut index = VectorIndex::new(embedder.dim())?;
    for p in store.publication_nodes(v) {
        let vec = quantize(embedder.embed(&p.publication_id)?)?;
        let doc = Document::Publication(PublicationDoc { publication_id: p.publication_id });
        index.insert(p.iri.as_str(), doc, vec)?;
    }
    for e in store.entity_nodes(v) {
        let doc = entity_doc(&e);
        let vec = quantize(embedder.embed(&entity_text(&doc))?)?;
        index.insert(e.iri.as_str(), Document::Entity(doc), vec)?;
    }
    for r in store.relation_rows(v) {
        let publication = match &r.publication {
            Some(iri) => String::from(iri.as_str()),
            None => String::from(v.publication_node(&r.publication_id).as_str()),
        };
        let doc = relation_doc(&r, publication);
        let vec = quantize(embedder.embed(&relation_text(&doc))?)?;
        index.insert(r.relation.as_str(), Document::Relation(doc), vec)?;
    }
    Ok(index)
}

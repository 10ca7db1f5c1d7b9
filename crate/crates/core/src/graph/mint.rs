//! Deterministic identifiers and the per-relation triple pattern.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use sha2::{Digest, Sha256};

use super::vocab::Vocabulary;
use super::{Iri, Literal, Triple};
use crate::ontology::OntologySpec;
use crate::refinement::RefinedRelation;

/// Length-prefixed concatenation of the relation key:
/// `<len>:<relation_type><len>:<subject><len>:<object><len>:<publication_id>`,
/// lengths in UTF-8 bytes.
pub fn canonical_relation_key(r: &RefinedRelation) -> String {
    let (rel, subject, object, publication) = r.key();
    let mut out = String::new();
    for field in [rel, subject, object, publication] {
        let _ = write!(out, "{}:{}", field.len(), field);
    }
    out
}

/// `{base}relation/` followed by the lowercase hex SHA-256 of the canonical key.
pub fn mint_relation_iri(r: &RefinedRelation, spec: &OntologySpec) -> Iri {
    let digest = Sha256::digest(canonical_relation_key(r).as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest.iter() {
        let _ = write!(hex, "{byte:02x}");
    }
    Vocabulary::for_spec(spec).relation_node(&hex)
}

/// Percent-encodes every byte outside the RFC 3986 unreserved set.
pub fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// The twelve triples describing one relation:
///
/// - relation node: type, hasSubject, hasPredicate (literal), hasObject,
///   prov:wasDerivedFrom
/// - subject and object entity nodes: type and label each
/// - publication node: type and label
/// - the direct subject→object edge with the predicate IRI
pub fn relation_to_triples(r: &RefinedRelation, spec: &OntologySpec) -> Vec<Triple> {
    let v = Vocabulary::for_spec(spec);
    let rel = mint_relation_iri(r, spec);
    let subject = v.entity_node(&r.subject.name);
    let object = v.entity_node(&r.object.name);
    let publication = v.publication_node(&r.publication_id);
    vec![
        Triple::new(rel.clone(), v.rdf_type.clone(), v.relation_class.clone()),
        Triple::new(rel.clone(), v.has_subject.clone(), subject.clone()),
        Triple::new(rel.clone(), v.has_predicate.clone(), Literal::plain(r.relation_type.as_str())),
        Triple::new(rel.clone(), v.has_object.clone(), object.clone()),
        Triple::new(rel, v.was_derived_from.clone(), publication.clone()),
        Triple::new(subject.clone(), v.rdf_type.clone(), v.entity_class(&r.subject.entity_type)),
        Triple::new(subject.clone(), v.rdfs_label.clone(), Literal::plain(r.subject.name.as_str())),
        Triple::new(object.clone(), v.rdf_type.clone(), v.entity_class(&r.object.entity_type)),
        Triple::new(object.clone(), v.rdfs_label.clone(), Literal::plain(r.object.name.as_str())),
        Triple::new(publication.clone(), v.rdf_type.clone(), v.publication_class.clone()),
        Triple::new(publication, v.rdfs_label.clone(), Literal::plain(r.publication_id.as_str())),
        Triple::new(subject, v.predicate(&r.relation_type), object),
    ]
}

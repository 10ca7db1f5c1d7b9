//! Vocabulary used for minted resources.
//!
//! Everything lives under the ontology's base IRI:
//!
//! | resource            | IRI                                       |
//! |---------------------|-------------------------------------------|
//! | relation class      | `{base}ontology/Relation`                 |
//! | publication class   | `{base}ontology/Publication`              |
//! | entity type class   | `{base}ontology/entity-type/{label}`      |
//! | reified links       | `{base}ontology/hasSubject`, `hasObject`  |
//! | predicate label     | `{base}ontology/hasPredicate` (literal)   |
//! | direct edge         | `{base}ontology/predicate/{label}`        |
//! | relation node       | `{base}relation/{sha256 hex}`             |
//! | entity node         | `{base}entity/{percent-encoded name}`     |
//! | publication node    | `{base}publication/{percent-encoded id}`  |

use alloc::format;

use super::mint::percent_encode;
use super::Iri;
use crate::ontology::{EntityType, OntologySpec, RelationType};

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
pub const PROV_WAS_DERIVED_FROM: &str = "http://www.w3.org/ns/prov#wasDerivedFrom";
pub const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    base: Iri,
    pub rdf_type: Iri,
    pub rdfs_label: Iri,
    pub was_derived_from: Iri,
    pub relation_class: Iri,
    pub publication_class: Iri,
    pub has_subject: Iri,
    pub has_object: Iri,
    pub has_predicate: Iri,
}

impl Vocabulary {
    pub fn new(base: &Iri) -> Self {
        let fixed = |s: &str| Iri::new(s).expect("well-known IRI");
        Vocabulary {
            base: base.clone(),
            rdf_type: fixed(RDF_TYPE),
            rdfs_label: fixed(RDFS_LABEL),
            was_derived_from: fixed(PROV_WAS_DERIVED_FROM),
            relation_class: base.join("ontology/Relation"),
            publication_class: base.join("ontology/Publication"),
            has_subject: base.join("ontology/hasSubject"),
            has_object: base.join("ontology/hasObject"),
            has_predicate: base.join("ontology/hasPredicate"),
        }
    }

    pub fn for_spec(spec: &OntologySpec) -> Self {
        Self::new(spec.base_iri())
    }

    pub fn base(&self) -> &Iri {
        &self.base
    }

    pub fn entity_class(&self, t: &EntityType) -> Iri {
        self.base.join(&format!("ontology/entity-type/{}", t.as_str()))
    }

    /// Inverse of [`Vocabulary::entity_class`]: the label if `iri` is an entity class.
    pub fn entity_class_label<'a>(&self, iri: &'a Iri) -> Option<&'a str> {
        iri.as_str()
            .strip_prefix(self.base.as_str())
            .and_then(|rest| rest.strip_prefix("ontology/entity-type/"))
    }

    pub fn predicate(&self, r: &RelationType) -> Iri {
        self.base.join(&format!("ontology/predicate/{}", r.as_str()))
    }

    pub fn relation_node(&self, hex_digest: &str) -> Iri {
        self.base.join(&format!("relation/{hex_digest}"))
    }

    pub fn entity_node(&self, canonical_name: &str) -> Iri {
        self.base.join(&format!("entity/{}", percent_encode(canonical_name)))
    }

    pub fn publication_node(&self, publication_id: &str) -> Iri {
        self.base.join(&format!("publication/{}", percent_encode(publication_id)))
    }
}

//! Fixed read queries over the reified relation pattern.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use super::vocab::Vocabulary;
use super::{GraphStore, Iri, Literal, Term};

/// A relation node resolved to its labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct RelationRow {
    pub relation: String,
    pub predicate: String,
    pub subject: String,
    pub object: String,
    pub publication_id: String,
    #[serde(skip)]
    pub publication: Option<Iri>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityNode {
    pub iri: Iri,
    pub name: String,
    pub entity_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicationNode {
    pub iri: Iri,
    pub publication_id: String,
}

fn first_literal<'a>(store: &'a GraphStore, s: &Iri, p: &Iri) -> Option<&'a str> {
    store.objects(s, p).find_map(|o| o.as_literal()).map(|l| l.value.as_str())
}

fn first_iri<'a>(store: &'a GraphStore, s: &Iri, p: &Iri) -> Option<&'a Iri> {
    store.objects(s, p).find_map(Term::as_iri)
}

impl GraphStore {
    /// Relation nodes in IRI order.
    pub fn relation_nodes<'a>(&'a self, v: &Vocabulary) -> impl Iterator<Item = &'a Iri> + 'a {
        self.subjects(&v.rdf_type, &Term::Iri(v.relation_class.clone()))
            .collect::<Vec<_>>()
            .into_iter()
    }

    /// Resolves a relation node; `None` if any part of the pattern is missing.
    pub fn relation_row(&self, v: &Vocabulary, relation: &Iri) -> Option<RelationRow> {
        let predicate = first_literal(self, relation, &v.has_predicate)?;
        let subject = first_iri(self, relation, &v.has_subject)?;
        let object = first_iri(self, relation, &v.has_object)?;
        let publication = first_iri(self, relation, &v.was_derived_from)?;
        Some(RelationRow {
            relation: relation.as_str().into(),
            predicate: predicate.into(),
            subject: first_literal(self, subject, &v.rdfs_label)?.into(),
            object: first_literal(self, object, &v.rdfs_label)?.into(),
            publication_id: first_literal(self, publication, &v.rdfs_label)?.into(),
            publication: Some(publication.clone()),
        })
    }

    pub fn relation_rows(&self, v: &Vocabulary) -> Vec<RelationRow> {
        self.relation_nodes(v).filter_map(|r| self.relation_row(v, r)).collect()
    }

    /// Nodes that some relation points at via hasSubject or hasObject.
    pub fn entity_nodes(&self, v: &Vocabulary) -> Vec<EntityNode> {
        let iris: BTreeSet<&Iri> = self
            .pairs(&v.has_subject)
            .chain(self.pairs(&v.has_object))
            .filter_map(|(_, o)| o.as_iri())
            .collect();
        iris.into_iter()
            .filter_map(|iri| {
                let name = first_literal(self, iri, &v.rdfs_label)?;
                let entity_type = self
                    .objects(iri, &v.rdf_type)
                    .filter_map(Term::as_iri)
                    .find_map(|c| v.entity_class_label(c))?;
                Some(EntityNode { iri: iri.clone(), name: name.into(), entity_type: entity_type.into() })
            })
            .collect()
    }

    pub fn publication_nodes(&self, v: &Vocabulary) -> Vec<PublicationNode> {
        self.subjects(&v.rdf_type, &Term::Iri(v.publication_class.clone()))
            .filter_map(|iri| {
                let id = first_literal(self, iri, &v.rdfs_label)?;
                Some(PublicationNode { iri: iri.clone(), publication_id: id.into() })
            })
            .collect()
    }

    /// Relations whose subject or object is the entity labelled
    /// `canonical_name`, ordered by relation IRI, at most `limit`.
    pub fn query_relations_for_entity(
        &self,
        v: &Vocabulary,
        canonical_name: &str,
        limit: usize,
    ) -> Vec<RelationRow> {
        let label = Term::Literal(Literal::plain(canonical_name));
        let mut relations: BTreeSet<&Iri> = BTreeSet::new();
        for node in self.subjects(&v.rdfs_label, &label) {
            let node = Term::Iri(node.clone());
            relations.extend(self.subjects(&v.has_subject, &node));
            relations.extend(self.subjects(&v.has_object, &node));
        }
        relations
            .into_iter()
            .filter_map(|r| self.relation_row(v, r))
            .take(limit)
            .collect()
    }
}

/// Checks that every relation node has exactly one subject, object and
/// predicate label and at least one provenance link. Returns one message
/// per violation.
pub fn check_integrity(store: &GraphStore, v: &Vocabulary) -> Result<usize, Vec<String>> {
    let mut problems = Vec::new();
    let mut count = 0;
    for rel in store.relation_nodes(v) {
        count += 1;
        let n = |p: &Iri| store.objects(rel, p).count();
        for (p, name) in [(&v.has_subject, "hasSubject"), (&v.has_object, "hasObject"), (&v.has_predicate, "hasPredicate")] {
            if n(p) != 1 {
                problems.push(format!("{rel}: {} {name} links", n(p)));
            }
        }
        if n(&v.was_derived_from) == 0 {
            problems.push(format!("{rel}: no prov:wasDerivedFrom link"));
        }
        for p in [&v.has_subject, &v.has_object] {
            for e in store.objects(rel, p).filter_map(Term::as_iri) {
                if first_literal(store, e, &v.rdfs_label).is_none() {
                    problems.push(format!("{rel}: entity {e} has no label"));
                }
            }
        }
    }
    if problems.is_empty() {
        Ok(count)
    } else {
        Err(problems)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::RawRelation;
    use crate::graph::{relation_to_triples, Triple};
    use crate::ontology::OntologySpec;
    use crate::refinement::refine_raw;
    use alloc::vec;

    fn store_with(rels: &[(&str, &str, &str, &str, &str, &str)]) -> (GraphStore, Vocabulary) {
        let spec = OntologySpec::default();
        let raw: Vec<RawRelation> = rels
            .iter()
            .map(|(r, t1, n1, t2, n2, p)| RawRelation {
                relation_type: (*r).into(),
                entity1_type: (*t1).into(),
                entity1_name: (*n1).into(),
                entity2_type: (*t2).into(),
                entity2_name: (*n2).into(),
                publication_id: (*p).into(),
            })
            .collect();
        let (refined, _) = refine_raw(&raw, &spec);
        let mut store = GraphStore::new();
        for r in &refined {
            store.extend(relation_to_triples(r, &spec)).unwrap();
        }
        (store, Vocabulary::for_spec(&spec))
    }

    fn brute_force(store: &GraphStore, v: &Vocabulary, name: &str) -> Vec<String> {
        let triples: Vec<Triple> = store.to_vec();
        let label = Term::Literal(Literal::plain(name));
        let nodes: Vec<&Iri> = triples
            .iter()
            .filter(|t| t.predicate == v.rdfs_label && t.object == label)
            .map(|t| &t.subject)
            .collect();
        let mut rels: Vec<String> = triples
            .iter()
            .filter(|t| {
                (t.predicate == v.has_subject || t.predicate == v.has_object)
                    && nodes.iter().any(|n| t.object == Term::Iri((*n).clone()))
            })
            .map(|t| t.subject.as_str().into())
            .collect();
        rels.sort();
        rels.dedup();
        rels
    }

    #[test]
    fn relations_touching_an_entity() {
        let (store, v) = store_with(&[
            ("affect", "disease", "AMD", "body_part", "retina", "P1"),
            ("affect", "disease", "drusen", "body_part", "retina", "P1"),
            ("affect", "disease", "GA", "body_part", "retina", "P2"),
            ("cause", "disease", "smoking", "disease", "AMD", "P2"),
        ]);
        let all = store.query_relations_for_entity(&v, "retina", usize::MAX);
        assert_eq!(all.len(), 3);
        let ids: Vec<String> = all.iter().map(|r| r.relation.clone()).collect();
        assert_eq!(ids, brute_force(&store, &v, "retina"));
        let two = store.query_relations_for_entity(&v, "retina", 2);
        assert_eq!(two, all[..2]);
        assert!(store.query_relations_for_entity(&v, "choroid", 5).is_empty());

        let amd = store.query_relations_for_entity(&v, "age-related macular degeneration", 10);
        assert_eq!(amd.len(), 2);
        assert_eq!(
            amd.iter().map(|r| r.relation.clone()).collect::<Vec<_>>(),
            brute_force(&store, &v, "age-related macular degeneration")
        );
        assert!(amd.iter().all(|r| !r.publication_id.is_empty()));
    }

    #[test]
    fn node_listings_and_integrity() {
        let (store, v) = store_with(&[
            ("affect", "disease", "AMD", "body_part", "retina", "P1"),
            ("cause", "disease", "AMD", "symptom", "vision loss", "P1"),
        ]);
        assert_eq!(store.entity_nodes(&v).len(), 3);
        assert_eq!(store.publication_nodes(&v).len(), 1);
        assert_eq!(store.relation_rows(&v).len(), 2);
        assert_eq!(check_integrity(&store, &v), Ok(2));
        let names: Vec<String> = store.entity_nodes(&v).into_iter().map(|e| e.entity_type).collect();
        assert_eq!(names, vec!["disease", "body_part", "symptom"]);
    }

    #[test]
    fn integrity_reports_missing_provenance() {
        let (store, v) = store_with(&[("affect", "disease", "AMD", "body_part", "retina", "P1")]);
        let broken: GraphStore = store.iter().filter(|t| t.predicate != v.was_derived_from).collect();
        let problems = check_integrity(&broken, &v).unwrap_err();
        assert_eq!(problems.len(), 1);
        assert!(problems[0].contains("wasDerivedFrom"));
    }
}

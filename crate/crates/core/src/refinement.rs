//! Post-extraction cleanup: canonical entity names, one type per entity,
//! and removal of duplicate and self-referential relations.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::extraction::{validate_relation, ExtractionReport, RawRelation, ValidatedRelation};
use crate::ontology::{EntityType, OntologySpec, RelationType};

/// Lower-cases, trims and collapses internal whitespace runs to one space.
pub fn collapse_and_lowercase(name: &str) -> String {
    let lower = name.to_lowercase();
    let mut out = String::with_capacity(lower.len());
    for word in lower.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Canonical form of an entity name, or `None` if nothing is left.
///
/// Trailing tokens are stripped until none remains at the end, but the last
/// word is always kept. The synonym table is then applied to the whole name.
pub fn normalize_entity_name(name: &str, spec: &OntologySpec) -> Option<String> {
    let collapsed = collapse_and_lowercase(name);
    if collapsed.is_empty() {
        return None;
    }
    let mut words: Vec<&str> = collapsed.split(' ').collect();
    while words.len() > 1 && spec.trailing_tokens().contains(*words.last()?) {
        words.pop();
    }
    let stripped = words.join(" ");
    Some(match spec.synonym_map().get(&stripped) {
        Some(canonical) => canonical.clone(),
        None => stripped,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EntityRef {
    pub name: String,
    #[serde(rename = "type")]
    pub entity_type: EntityType,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct RefinedRelation {
    pub relation_type: RelationType,
    pub subject: EntityRef,
    pub object: EntityRef,
    pub publication_id: String,
}

impl RefinedRelation {
    /// The identity of a relation: (relation_type, subject, object, publication_id).
    pub fn key(&self) -> (&str, &str, &str, &str) {
        (
            self.relation_type.as_str(),
            &self.subject.name,
            &self.object.name,
            &self.publication_id,
        )
    }

    pub fn to_raw(&self) -> RawRelation {
        RawRelation {
            relation_type: self.relation_type.as_str().into(),
            entity1_type: self.subject.entity_type.as_str().into(),
            entity1_name: self.subject.name.clone(),
            entity2_type: self.object.entity_type.as_str().into(),
            entity2_name: self.object.name.clone(),
            publication_id: self.publication_id.clone(),
        }
    }

    pub fn to_record(&self) -> RefinedRecord {
        RefinedRecord {
            relation_type: self.relation_type.as_str().into(),
            subject: EntityRecord {
                name: self.subject.name.clone(),
                entity_type: self.subject.entity_type.as_str().into(),
            },
            object: EntityRecord {
                name: self.object.name.clone(),
                entity_type: self.object.entity_type.as_str().into(),
            },
            publication_id: self.publication_id.clone(),
        }
    }
}

/// On-disk shape of a refined relation; labels as plain strings until
/// checked against a spec with [`RefinedRecord::into_refined`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedRecord {
    pub relation_type: String,
    pub subject: EntityRecord,
    pub object: EntityRecord,
    pub publication_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub name: String,
    #[serde(rename = "type")]
    pub entity_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordCheckError {
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("entity name `{0}` is not canonical")]
    NotCanonical(String),
    #[error("self-relation on `{0}`")]
    SelfRelation(String),
    #[error("empty publication id")]
    EmptyPublication,
}

impl RefinedRecord {
    pub fn into_refined(self, spec: &OntologySpec) -> Result<RefinedRelation, RecordCheckError> {
        let relation_type = spec
            .relation_type(&self.relation_type)
            .ok_or(RecordCheckError::UnknownLabel(self.relation_type))?;
        let entity = |e: EntityRecord| -> Result<EntityRef, RecordCheckError> {
            let entity_type = spec
                .entity_type(&e.entity_type)
                .ok_or(RecordCheckError::UnknownLabel(e.entity_type))?;
            if normalize_entity_name(&e.name, spec).as_deref() != Some(e.name.as_str()) {
                return Err(RecordCheckError::NotCanonical(e.name));
            }
            Ok(EntityRef { name: e.name, entity_type })
        };
        let subject = entity(self.subject)?;
        let object = entity(self.object)?;
        if subject.name == object.name {
            return Err(RecordCheckError::SelfRelation(subject.name));
        }
        if self.publication_id.trim().is_empty() {
            return Err(RecordCheckError::EmptyPublication);
        }
        Ok(RefinedRelation { relation_type, subject, object, publication_id: self.publication_id })
    }
}

/// Per-name type decision: the chosen type and every observed type with its count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TypeResolution {
    pub entries: BTreeMap<String, TypeChoice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypeChoice {
    pub chosen: EntityType,
    pub observed: BTreeMap<EntityType, usize>,
}

impl TypeResolution {
    pub fn chosen(&self, name: &str) -> Option<&EntityType> {
        self.entries.get(name).map(|c| &c.chosen)
    }

    /// Names that were seen with more than one type.
    pub fn conflicts(&self) -> usize {
        self.entries.values().filter(|c| c.observed.len() > 1).count()
    }
}

/// Rewrites every occurrence of a name to its modal type; ties go to the
/// type listed first in the ontology's priority order. Names must already be
/// normalized.
pub fn resolve_entity_types(
    relations: &[ValidatedRelation],
    spec: &OntologySpec,
) -> (TypeResolution, Vec<ValidatedRelation>) {
    let mut observed: BTreeMap<&str, BTreeMap<&EntityType, usize>> = BTreeMap::new();
    for r in relations {
        *observed.entry(&r.entity1_name).or_default().entry(&r.entity1_type).or_default() += 1;
        *observed.entry(&r.entity2_name).or_default().entry(&r.entity2_type).or_default() += 1;
    }
    let mut resolution = TypeResolution::default();
    for (name, counts) in observed {
        let chosen = counts
            .iter()
            .max_by(|(ta, ca), (tb, cb)| {
                ca.cmp(cb).then_with(|| spec.priority_rank(tb).cmp(&spec.priority_rank(ta)))
            })
            .map(|(t, _)| (*t).clone())
            .expect("every observed name has at least one type");
        resolution.entries.insert(
            name.to_owned(),
            TypeChoice {
                chosen,
                observed: counts.into_iter().map(|(t, c)| (t.clone(), c)).collect(),
            },
        );
    }
    let rewritten = relations
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.entity1_type = resolution.entries[&r.entity1_name].chosen.clone();
            r.entity2_type = resolution.entries[&r.entity2_name].chosen.clone();
            r
        })
        .collect();
    (resolution, rewritten)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementStats {
    pub input: usize,
    pub output: usize,
    pub invalid_label: usize,
    pub empty_name: usize,
    pub self_relation: usize,
    pub duplicate: usize,
    pub type_conflicts: usize,
}

impl RefinementStats {
    pub fn dropped(&self) -> usize {
        self.invalid_label + self.empty_name + self.self_relation + self.duplicate
    }
}

/// Drops self-relations, then keeps the first occurrence of every
/// (relation_type, subject, object, publication_id) key. Returns the kept
/// relations and the (self_relation, duplicate) drop counts.
pub fn dedupe_and_filter(relations: &[ValidatedRelation]) -> (Vec<RefinedRelation>, usize, usize) {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let (mut self_relations, mut duplicates) = (0, 0);
    for r in relations {
        if r.entity1_name == r.entity2_name {
            self_relations += 1;
            continue;
        }
        let key = (
            r.relation_type.as_str(),
            r.entity1_name.as_str(),
            r.entity2_name.as_str(),
            r.publication_id.as_str(),
        );
        if !seen.insert(key) {
            duplicates += 1;
            continue;
        }
        out.push(RefinedRelation {
            relation_type: r.relation_type.clone(),
            subject: EntityRef { name: r.entity1_name.clone(), entity_type: r.entity1_type.clone() },
            object: EntityRef { name: r.entity2_name.clone(), entity_type: r.entity2_type.clone() },
            publication_id: r.publication_id.clone(),
        });
    }
    (out, self_relations, duplicates)
}

/// Full refinement of raw relations: validate, normalize names, resolve
/// types, dedupe and filter.
pub fn refine_raw(raw: &[RawRelation], spec: &OntologySpec) -> (Vec<RefinedRelation>, RefinementStats) {
    let mut stats = RefinementStats { input: raw.len(), ..Default::default() };
    let mut normalized = Vec::with_capacity(raw.len());
    for r in raw {
        let Ok(mut v) = validate_relation(r, spec) else {
            stats.invalid_label += 1;
            continue;
        };
        match (
            normalize_entity_name(&v.entity1_name, spec),
            normalize_entity_name(&v.entity2_name, spec),
        ) {
            (Some(a), Some(b)) => {
                v.entity1_name = a;
                v.entity2_name = b;
                normalized.push(v);
            }
            _ => stats.empty_name += 1,
        }
    }
    let (resolution, typed) = resolve_entity_types(&normalized, spec);
    stats.type_conflicts = resolution.conflicts();
    let (out, self_relations, duplicates) = dedupe_and_filter(&typed);
    stats.self_relation = self_relations;
    stats.duplicate = duplicates;
    stats.output = out.len();
    (out, stats)
}

pub fn refine(report: &ExtractionReport, spec: &OntologySpec) -> (Vec<RefinedRelation>, RefinementStats) {
    refine_raw(&report.relations, spec)
}

/// Re-runs refinement over already refined relations.
pub fn refine_refined(
    relations: &[RefinedRelation],
    spec: &OntologySpec,
) -> (Vec<RefinedRelation>, RefinementStats) {
    let raw: Vec<RawRelation> = relations.iter().map(RefinedRelation::to_raw).collect();
    refine_raw(&raw, spec)
}

//! The causal AMD taxonomy: entity and relation labels with definitions,
//! plus the tables the refinement stage runs on (synonyms, trailing tokens,
//! type priority) and the IRI prefix for minted graph resources.
//!
//! An [`OntologySpec`] is only obtainable through [`OntologySpec::from_document`],
//! which checks every invariant, so holders of a spec never re-validate it.
//! The same spec drives both the extraction prompt and label validation.

mod prompt;

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use crate::graph::Iri;
use crate::refinement::collapse_and_lowercase;

pub use prompt::{build_extraction_prompt, extraction_user_message, PromptExample, FEW_SHOT_EXAMPLES};

/// Entity labels every spec must define, in canonical order.
pub const CORE_ENTITY_LABELS: [&str; 12] = [
    "disease",
    "symptom",
    "treatment",
    "risk_factor",
    "test",
    "gene",
    "biomarker",
    "complication",
    "prognosis",
    "comorbidity",
    "progression",
    "body_part",
];

/// Relation labels every spec must define, in canonical order.
pub const CORE_RELATION_LABELS: [&str; 8] = [
    "cause",
    "treat",
    "present",
    "diagnose",
    "aggravate",
    "prevent",
    "improve",
    "affect",
];

/// Default tie-break order for entity types, most specific clinical type first.
pub const DEFAULT_TYPE_PRIORITY: [&str; 12] = [
    "disease",
    "gene",
    "biomarker",
    "treatment",
    "test",
    "risk_factor",
    "complication",
    "comorbidity",
    "symptom",
    "prognosis",
    "progression",
    "body_part",
];

pub const DEFAULT_BASE_IRI: &str = "http://example.org/causalamd/";

/// An entity label accepted by a loaded [`OntologySpec`].
///
/// Values can only be produced by [`OntologySpec::entity_type`], so holding
/// one proves the label belongs to the ontology it came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct EntityType(String);

impl EntityType {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A relation label accepted by a loaded [`OntologySpec`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct RelationType(String);

impl RelationType {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Which worked examples the extraction prompt carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    ZeroShot,
    SingleShot,
    #[default]
    FewShot,
}

impl PromptMode {
    pub fn example_count(self) -> usize {
        match self {
            PromptMode::ZeroShot => 0,
            PromptMode::SingleShot => 1,
            PromptMode::FewShot => 3,
        }
    }
}

impl core::str::FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" | "zero_shot" | "zero-shot" => Ok(PromptMode::ZeroShot),
            "single" | "single_shot" | "single-shot" | "one" => Ok(PromptMode::SingleShot),
            "few" | "few_shot" | "few-shot" => Ok(PromptMode::FewShot),
            other => Err(alloc::format!("unknown prompt mode `{other}`")),
        }
    }
}

/// Unvalidated contents of an ontology spec document, in declaration order.
///
/// File parsers fill this in; [`OntologySpec::from_document`] checks it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OntologyDocument {
    pub entities: Vec<(String, String)>,
    pub relations: Vec<(String, String)>,
    pub synonyms: Vec<(String, String)>,
    pub trailing_tokens: Vec<String>,
    pub type_priority: Vec<String>,
    pub base_iri: String,
}

impl OntologyDocument {
    /// The shipped causal AMD ontology.
    pub fn causal_amd() -> Self {
        let entities = [
            ("disease", "A disorder of structure or function, such as AMD or one of its subtypes."),
            ("symptom", "A sign or manifestation experienced by or observed in a patient, such as vision loss."),
            ("treatment", "A therapy, drug, procedure or other intervention used to manage a condition."),
            ("risk_factor", "An exposure, behaviour or characteristic that raises the likelihood of a condition."),
            ("test", "A test, imaging modality or diagnostic tool used to detect or assess a condition."),
            ("gene", "A gene or genetic variant."),
            ("biomarker", "A measurable molecular, imaging or physiological indicator of a biological state."),
            ("complication", "A secondary condition or adverse outcome arising from a disease or its treatment."),
            ("prognosis", "The expected course or outcome of a condition."),
            ("comorbidity", "A condition co-occurring with the primary disease."),
            ("progression", "The advancement or worsening of a condition over time."),
            ("body_part", "An anatomical structure, tissue or region, such as the retina."),
        ];
        let relations = [
            ("cause", "Causes or contributes to the occurrence of another entity."),
            ("treat", "Is a treatment or intervention for another entity."),
            ("present", "Is a symptom or manifestation of another entity."),
            ("diagnose", "Is a test or diagnostic tool for another entity."),
            ("aggravate", "Worsens or exacerbates another entity."),
            ("prevent", "Prevents or reduces the occurrence or development of another entity."),
            ("improve", "Enhances or improves the condition or treatment of another entity."),
            ("affect", "Affects a certain body part."),
        ];
        // "amd" and the two trailing tokens are the documented entries; the
        // rest is a repo-supplied starter list.
        let synonyms = [
            ("amd", "age-related macular degeneration"),
            ("armd", "age-related macular degeneration"),
            ("age related macular degeneration", "age-related macular degeneration"),
            ("nvamd", "neovascular age-related macular degeneration"),
            ("namd", "neovascular age-related macular degeneration"),
            ("ga", "geographic atrophy"),
            ("cnv", "choroidal neovascularization"),
            ("rpe", "retinal pigment epithelium"),
            ("oct", "optical coherence tomography"),
            ("vegf", "vascular endothelial growth factor"),
        ];
        OntologyDocument {
            entities: pairs(&entities),
            relations: pairs(&relations),
            synonyms: pairs(&synonyms),
            trailing_tokens: ["cnv", "ga"].iter().map(|s| (*s).to_owned()).collect(),
            type_priority: DEFAULT_TYPE_PRIORITY.iter().map(|s| (*s).to_owned()).collect(),
            base_iri: DEFAULT_BASE_IRI.to_owned(),
        }
    }
}

fn pairs(items: &[(&str, &str)]) -> Vec<(String, String)> {
    items.iter().map(|(k, v)| ((*k).to_owned(), (*v).to_owned())).collect()
}

/// Why an ontology document was rejected. Every variant names the section
/// and the offending key.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("[{section}]: missing definition for label `{label}`")]
    MissingLabel { section: &'static str, label: String },
    #[error("[{section}]: empty definition for label `{label}`")]
    EmptyDefinition { section: &'static str, label: String },
    #[error("[{section}]: unknown label `{label}`")]
    UnknownLabel { section: &'static str, label: String },
    #[error("[{section}]: label `{label}` defined more than once")]
    DuplicateLabel { section: &'static str, label: String },
    #[error("[{section}]: label `{label}` is not a lower-case snake_case token")]
    MalformedLabel { section: &'static str, label: String },
    #[error("[synonyms]: synonym key not normalized: `{key}`")]
    SynonymKeyNotNormalized { key: String },
    #[error("[synonyms]: duplicate synonym key `{key}`")]
    DuplicateSynonym { key: String },
    #[error("[synonyms]: value for `{key}` is not a canonical name: `{value}`")]
    SynonymValueNotCanonical { key: String, value: String },
    #[error("[synonyms]: key `{key}` ends with a trailing token and can never match")]
    UnreachableSynonym { key: String },
    #[error("[trailing_tokens]: token `{token}` must be a single normalized word")]
    MalformedTrailingToken { token: String },
    #[error("[type_priority]: missing entity labels: {missing}")]
    IncompletePriority { missing: String },
    #[error("[iri]: base IRI `{iri}` must be an absolute IRI ending in `/` or `#`")]
    InvalidBaseIri { iri: String },
}

/// A validated ontology. Immutable; share it by reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OntologySpec {
    entity_defs: Vec<(EntityType, String)>,
    relation_defs: Vec<(RelationType, String)>,
    synonym_map: BTreeMap<String, String>,
    trailing_tokens: BTreeSet<String>,
    type_priority: Vec<EntityType>,
    base_iri: Iri,
}

impl Default for OntologySpec {
    fn default() -> Self {
        Self::from_document(OntologyDocument::causal_amd()).expect("shipped ontology is valid")
    }
}

impl OntologySpec {
    pub fn from_document(doc: OntologyDocument) -> Result<Self, SpecError> {
        let entity_defs = check_definitions("entities", &doc.entities, &CORE_ENTITY_LABELS)?
            .into_iter()
            .map(|(l, d)| (EntityType(l), d))
            .collect::<Vec<_>>();
        let relation_defs = check_definitions("relations", &doc.relations, &CORE_RELATION_LABELS)?
            .into_iter()
            .map(|(l, d)| (RelationType(l), d))
            .collect::<Vec<_>>();

        let mut trailing_tokens = BTreeSet::new();
        for token in &doc.trailing_tokens {
            let normalized = collapse_and_lowercase(token);
            if normalized.is_empty() || normalized != *token || token.contains(' ') {
                return Err(SpecError::MalformedTrailingToken { token: token.clone() });
            }
            trailing_tokens.insert(token.clone());
        }

        let mut synonym_map = BTreeMap::new();
        for (key, value) in &doc.synonyms {
            if key.is_empty() || collapse_and_lowercase(key) != *key {
                return Err(SpecError::SynonymKeyNotNormalized { key: key.clone() });
            }
            if ends_with_strippable_token(key, &trailing_tokens) {
                return Err(SpecError::UnreachableSynonym { key: key.clone() });
            }
            if synonym_map.insert(key.clone(), value.clone()).is_some() {
                return Err(SpecError::DuplicateSynonym { key: key.clone() });
            }
        }
        // Values must already be fixpoints of normalization so that
        // normalizing a canonical name never changes it again.
        for (key, value) in &synonym_map {
            let canonical = !value.is_empty()
                && collapse_and_lowercase(value) == *value
                && !ends_with_strippable_token(value, &trailing_tokens)
                && (!synonym_map.contains_key(value) || synonym_map.get(value) == Some(value));
            if !canonical {
                return Err(SpecError::SynonymValueNotCanonical {
                    key: key.clone(),
                    value: value.clone(),
                });
            }
        }

        let known: BTreeMap<&str, &EntityType> =
            entity_defs.iter().map(|(t, _)| (t.as_str(), t)).collect();
        let mut type_priority = Vec::with_capacity(entity_defs.len());
        let mut seen = BTreeSet::new();
        for label in &doc.type_priority {
            let Some(t) = known.get(label.as_str()) else {
                return Err(SpecError::UnknownLabel { section: "type_priority", label: label.clone() });
            };
            if !seen.insert(label.as_str()) {
                return Err(SpecError::DuplicateLabel { section: "type_priority", label: label.clone() });
            }
            type_priority.push((*t).clone());
        }
        if type_priority.len() != entity_defs.len() {
            let missing: Vec<&str> = entity_defs
                .iter()
                .map(|(t, _)| t.as_str())
                .filter(|l| !seen.contains(l))
                .collect();
            return Err(SpecError::IncompletePriority { missing: missing.join(", ") });
        }

        let base_iri = match Iri::new(doc.base_iri.clone()) {
            Ok(iri) if doc.base_iri.ends_with('/') || doc.base_iri.ends_with('#') => iri,
            _ => return Err(SpecError::InvalidBaseIri { iri: doc.base_iri }),
        };

        Ok(OntologySpec {
            entity_defs,
            relation_defs,
            synonym_map,
            trailing_tokens,
            type_priority,
            base_iri,
        })
    }

    /// Looks up an entity label, byte-exact.
    pub fn entity_type(&self, label: &str) -> Option<EntityType> {
        self.entity_defs.iter().find(|(t, _)| t.0 == label).map(|(t, _)| t.clone())
    }

    /// Looks up a relation label, byte-exact.
    pub fn relation_type(&self, label: &str) -> Option<RelationType> {
        self.relation_defs.iter().find(|(t, _)| t.0 == label).map(|(t, _)| t.clone())
    }

    pub fn entity_types(&self) -> impl Iterator<Item = &EntityType> {
        self.entity_defs.iter().map(|(t, _)| t)
    }

    pub fn relation_types(&self) -> impl Iterator<Item = &RelationType> {
        self.relation_defs.iter().map(|(t, _)| t)
    }

    pub fn entity_defs(&self) -> &[(EntityType, String)] {
        &self.entity_defs
    }

    pub fn relation_defs(&self) -> &[(RelationType, String)] {
        &self.relation_defs
    }

    pub fn synonym_map(&self) -> &BTreeMap<String, String> {
        &self.synonym_map
    }

    pub fn trailing_tokens(&self) -> &BTreeSet<String> {
        &self.trailing_tokens
    }

    pub fn type_priority(&self) -> &[EntityType] {
        &self.type_priority
    }

    /// Position of `t` in the priority order; lower wins ties.
    pub fn priority_rank(&self, t: &EntityType) -> usize {
        self.type_priority.iter().position(|p| p == t).unwrap_or(usize::MAX)
    }

    pub fn base_iri(&self) -> &Iri {
        &self.base_iri
    }
}

fn check_definitions(
    section: &'static str,
    entries: &[(String, String)],
    required: &[&str],
) -> Result<Vec<(String, String)>, SpecError> {
    let mut out: Vec<(String, String)> = Vec::with_capacity(entries.len());
    for (label, definition) in entries {
        if !is_snake_case(label) {
            return Err(SpecError::MalformedLabel { section, label: label.clone() });
        }
        if out.iter().any(|(l, _)| l == label) {
            return Err(SpecError::DuplicateLabel { section, label: label.clone() });
        }
        if definition.trim().is_empty() {
            return Err(SpecError::EmptyDefinition { section, label: label.clone() });
        }
        out.push((label.clone(), definition.trim().to_string()));
    }
    for label in required {
        if !out.iter().any(|(l, _)| l == label) {
            return Err(SpecError::MissingLabel { section, label: (*label).to_owned() });
        }
    }
    Ok(out)
}

fn is_snake_case(label: &str) -> bool {
    let mut chars = label.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

/// True when normalization would strip a trailing token off `name`.
fn ends_with_strippable_token(name: &str, tokens: &BTreeSet<String>) -> bool {
    match name.rsplit_once(' ') {
        Some((_, last)) => tokens.contains(last),
        None => false,
    }
}

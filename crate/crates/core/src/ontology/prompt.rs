//! Extraction prompt generation.
//!
//! The prompt is rendered from `templates/extraction_prompt.txt` by filling
//! named slots from the `OntologySpec`, so any label added to the ontology shows up
//! in the prompt without code changes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{OntologySpec, PromptMode};
use crate::extraction::RawRelation;

const TEMPLATE: &str = include_str!("../../templates/extraction_prompt.txt");

/// One worked example: input sentence and the expected output lines as
/// `(relation, type1, name1, type2, name2)`.
#[derive(Debug, Clone, Copy)]
pub struct PromptExample {
    pub text: &'static str,
    pub relations: &'static [(&'static str, &'static str, &'static str, &'static str, &'static str)],
}

pub const FEW_SHOT_EXAMPLES: [PromptExample; 3] = [
    PromptExample {
        text: "AMD affects the retina and causes vision loss.",
        relations: &[
            ("affect", "disease", "AMD", "body_part", "retina"),
            ("cause", "disease", "AMD", "symptom", "vision loss"),
        ],
    },
    PromptExample {
        text: "Smoking is a risk factor that aggravates AMD progression.",
        relations: &[("aggravate", "risk_factor", "Smoking", "progression", "AMD progression")],
    },
    PromptExample {
        text: "Anti-VEGF therapy treats wet AMD and improves vision.",
        relations: &[
            ("treat", "treatment", "Anti-VEGF therapy", "disease", "wet AMD"),
            ("improve", "treatment", "Anti-VEGF therapy", "symptom", "vision"),
        ],
    },
];

impl PromptExample {
    pub fn raw_relations(&self, publication_id: &str) -> Vec<RawRelation> {
        self.relations
            .iter()
            .map(|(r, t1, n1, t2, n2)| RawRelation {
                relation_type: (*r).into(),
                entity1_type: (*t1).into(),
                entity1_name: (*n1).into(),
                entity2_type: (*t2).into(),
                entity2_name: (*n2).into(),
                publication_id: publication_id.into(),
            })
            .collect()
    }
}

/// Renders the system prompt for relation extraction. Deterministic: the
/// same spec and mode always yield the same bytes.
pub fn build_extraction_prompt(spec: &OntologySpec, mode: PromptMode) -> String {
    let mut out = String::with_capacity(TEMPLATE.len() + 2048);
    let mut rest = TEMPLATE;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        let slot = tail[1..]
            .find('}')
            .map(|close| &tail[1..=close])
            .and_then(|name| render_slot(spec, mode, name).map(|v| (name.len() + 2, v)));
        match slot {
            Some((consumed, value)) => {
                out.push_str(&value);
                rest = &tail[consumed..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    while out.ends_with('\n') {
        out.pop();
    }
    out.push('\n');
    out
}

/// User turn carrying the abstract, in the same shape as the examples.
pub fn extraction_user_message(text: &str) -> String {
    format!("Text: \"{}\"\nOutput:", text.trim())
}

fn render_slot(spec: &OntologySpec, mode: PromptMode, name: &str) -> Option<String> {
    let bold_list = |labels: Vec<&str>| {
        labels.iter().map(|l| format!("**{l}**")).collect::<Vec<_>>().join(", ")
    };
    let value = match name {
        "entity_labels" => bold_list(spec.entity_types().map(|t| t.as_str()).collect()),
        "relation_labels" => bold_list(spec.relation_types().map(|t| t.as_str()).collect()),
        "entity_definitions" => spec
            .entity_defs()
            .iter()
            .map(|(t, d)| format!("- **{t}**: {d}"))
            .collect::<Vec<_>>()
            .join("\n"),
        "relation_definitions" => spec
            .relation_defs()
            .iter()
            .map(|(t, d)| format!("- **{t}**: {d}"))
            .collect::<Vec<_>>()
            .join("\n"),
        "examples" => render_examples(mode),
        _ => return None,
    };
    Some(value)
}

fn render_examples(mode: PromptMode) -> String {
    let count = mode.example_count();
    if count == 0 {
        return String::new();
    }
    let mut out = String::from(if count == 1 { "**Example**:\n" } else { "**Examples**:\n" });
    for example in FEW_SHOT_EXAMPLES.iter().take(count) {
        out.push_str(&format!("Text: \"{}\"\nOutput:\n", example.text));
        for relation in example.raw_relations("") {
            out.push_str(&relation.to_line());
            out.push('\n');
        }
    }
    out
}

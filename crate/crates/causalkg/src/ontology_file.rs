//! TOML ontology spec files.
//!
//! ```toml
//! [entities]
//! disease = "A disorder of structure or function ..."
//! [relations]
//! cause = "Causes or contributes to ..."
//! [synonyms]
//! amd = "age-related macular degeneration"
//! [trailing_tokens]
//! tokens = ["cnv", "ga"]
//! [type_priority]
//! order = ["disease", "gene", ...]
//! [iri]
//! base = "http://example.org/causalamd/"
//! ```

use std::path::Path;

use causalkg_core::ontology::{OntologyDocument, SpecError};
use causalkg_core::OntologySpec;
use toml::{Table, Value};

const SECTIONS: [&str; 6] = ["entities", "relations", "synonyms", "trailing_tokens", "type_priority", "iri"];

#[derive(Debug, thiserror::Error)]
pub enum OntologyFileError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed spec document: {0}")]
    Syntax(String),
    #[error("[{section}]: {message}")]
    Shape { section: String, message: String },
    #[error(transparent)]
    Invalid(#[from] SpecError),
}

fn shape(section: &str, message: impl Into<String>) -> OntologyFileError {
    OntologyFileError::Shape { section: section.to_owned(), message: message.into() }
}

fn section<'a>(root: &'a Table, name: &str) -> Result<&'a Table, OntologyFileError> {
    match root.get(name) {
        Some(Value::Table(t)) => Ok(t),
        Some(_) => Err(shape(name, "must be a table")),
        None => Err(shape(name, "section is missing")),
    }
}

fn string_map(root: &Table, name: &str) -> Result<Vec<(String, String)>, OntologyFileError> {
    section(root, name)?
        .iter()
        .map(|(k, v)| match v {
            Value::String(s) => Ok((k.clone(), s.clone())),
            _ => Err(shape(name, format!("value for `{k}` must be a string"))),
        })
        .collect()
}

fn string_list(root: &Table, name: &str, key: &str) -> Result<Vec<String>, OntologyFileError> {
    let table = section(root, name)?;
    if let Some(extra) = table.keys().find(|k| *k != key) {
        return Err(shape(name, format!("unexpected key `{extra}`")));
    }
    match table.get(key) {
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(s.clone()),
                _ => Err(shape(name, format!("`{key}` must hold only strings"))),
            })
            .collect(),
        Some(_) => Err(shape(name, format!("`{key}` must be an array of strings"))),
        None => Err(shape(name, format!("missing key `{key}`"))),
    }
}

/// Parses spec text into an unvalidated document.
pub fn parse_ontology_document(text: &str) -> Result<OntologyDocument, OntologyFileError> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        OntologyFileError::Syntax(e.to_string().replace('\n', " ").trim().to_owned())
    })?;
    if let Some(extra) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(shape(extra, "unknown section"));
    }
    let iri = section(&root, "iri")?;
    let base_iri = match iri.get("base") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(shape("iri", "`base` must be a string")),
        None => return Err(shape("iri", "missing key `base`")),
    };
    Ok(OntologyDocument {
        entities: string_map(&root, "entities")?,
        relations: string_map(&root, "relations")?,
        synonyms: string_map(&root, "synonyms")?,
        trailing_tokens: string_list(&root, "trailing_tokens", "tokens")?,
        type_priority: string_list(&root, "type_priority", "order")?,
        base_iri,
    })
}

pub fn load_ontology_spec(text: &str) -> Result<OntologySpec, OntologyFileError> {
    Ok(OntologySpec::from_document(parse_ontology_document(text)?)?)
}

pub fn load_ontology_path(path: &Path) -> Result<OntologySpec, OntologyFileError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| OntologyFileError::Io { path: path.display().to_string(), source })?;
    load_ontology_spec(&text)
}

/// Renders a document as spec-file TOML.
pub fn render_ontology_document(doc: &OntologyDocument) -> String {
    let mut root = Table::new();
    let map = |pairs: &[(String, String)]| {
        Value::Table(pairs.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect())
    };
    let list = |key: &str, items: &[String]| {
        let mut t = Table::new();
        t.insert(key.into(), Value::Array(items.iter().cloned().map(Value::String).collect()));
        Value::Table(t)
    };
    root.insert("entities".into(), map(&doc.entities));
    root.insert("relations".into(), map(&doc.relations));
    root.insert("synonyms".into(), map(&doc.synonyms));
    root.insert("trailing_tokens".into(), list("tokens", &doc.trailing_tokens));
    root.insert("type_priority".into(), list("order", &doc.type_priority));
    let mut iri = Table::new();
    iri.insert("base".into(), Value::String(doc.base_iri.clone()));
    root.insert("iri".into(), Value::Table(iri));
    toml::to_string(&root).expect("string tables always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shipped() -> String {
        render_ontology_document(&OntologyDocument::causal_amd())
    }

    #[test]
    fn render_then_parse_is_identity() {
        let doc = parse_ontology_document(&shipped()).unwrap();
        assert_eq!(doc, OntologyDocument::causal_amd());
    }

    #[test]
    fn bundled_asset_matches_builtin() {
        let text = include_str!("../assets/ontology.toml");
        assert_eq!(parse_ontology_document(text).unwrap(), OntologyDocument::causal_amd());
        assert_eq!(load_ontology_spec(text).unwrap(), OntologySpec::default());
    }

    #[test]
    fn missing_definition_is_named() {
        let text = shipped().replace("biomarker = ", "# biomarker = ");
        let err = load_ontology_spec(&text).unwrap_err().to_string();
        assert!(err.contains("biomarker"), "{err}");
    }

    #[test]
    fn upper_case_synonym_key() {
        let text = shipped().replace("\namd = ", "\nAMD = ");
        let err = load_ontology_spec(&text).unwrap_err().to_string();
        assert!(err.contains("synonym key not normalized"), "{err}");
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(load_ontology_spec("[entities"), Err(OntologyFileError::Syntax(_))));
        let no_iri = shipped().replace("[iri]", "[irx]");
        assert!(load_ontology_spec(&no_iri).unwrap_err().to_string().contains("irx"));
        let bad_value = shipped().replace("disease = \"A", "disease = 3\nx = \"A");
        assert!(load_ontology_spec(&bad_value).unwrap_err().to_string().contains("disease"));
        let incomplete = shipped().replace("\"body_part\",\n]", "]").replace(", \"body_part\"]", "]");
        let err = load_ontology_spec(&incomplete).unwrap_err().to_string();
        assert!(err.contains("type_priority") && err.contains("body_part"), "{err}");
    }

    #[test]
    fn new_label_reaches_prompt() {
        let text = shipped().replace("[relations]", "lifestyle = \"A habit or behaviour.\"\n\n[relations]");
        let text = text.replace("\"body_part\"", "\"body_part\", \"lifestyle\"");
        let spec = load_ontology_spec(&text).unwrap();
        let prompt = causalkg_core::ontology::build_extraction_prompt(&spec, Default::default());
        assert!(prompt.contains("lifestyle"));
    }
}

//! Parsing and validation of the model's relation output.
//!
//! The model is asked for one brace object per relation with five string
//! fields. Real output drifts: double quotes instead of single, several
//! objects on one line, stray prose, extra keys. [`parse_relation_output`]
//! is total over arbitrary input and turns everything it cannot accept into
//! [`ParseFailure`] records instead of errors.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ontology::{EntityType, OntologySpec, RelationType};

/// Output keys in the order the prompt lists them.
pub const RELATION_KEYS: [&str; 5] = [
    "relation_type",
    "entity1_type",
    "entity1_name",
    "entity2_type",
    "entity2_name",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractRecord {
    pub publication_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("publication_id must not be empty")]
    EmptyPublicationId,
    #[error("abstract text must not be empty (publication {0})")]
    EmptyText(String),
}

impl AbstractRecord {
    pub fn validate(&self) -> Result<(), RecordError> {
        if self.publication_id.trim().is_empty() {
            return Err(RecordError::EmptyPublicationId);
        }
        if self.text.trim().is_empty() {
            return Err(RecordError::EmptyText(self.publication_id.clone()));
        }
        Ok(())
    }
}

/// One relation as the model emitted it, stamped with its source.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawRelation {
    pub relation_type: String,
    pub entity1_type: String,
    pub entity1_name: String,
    pub entity2_type: String,
    pub entity2_name: String,
    pub publication_id: String,
}

impl RawRelation {
    fn field(&self, key: &str) -> &str {
        match key {
            "relation_type" => &self.relation_type,
            "entity1_type" => &self.entity1_type,
            "entity1_name" => &self.entity1_name,
            "entity2_type" => &self.entity2_type,
            _ => &self.entity2_name,
        }
    }

    /// Canonical single-quoted line, as shown to the model in the prompt.
    /// Backslashes, single quotes and line breaks are escaped.
    pub fn to_line(&self) -> String {
        let mut out = String::from("{");
        for (i, key) in RELATION_KEYS.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push('\'');
            out.push_str(key);
            out.push_str("': '");
            escape_into(&mut out, self.field(key));
            out.push('\'');
        }
        out.push('}');
        out
    }
}

fn escape_into(out: &mut String, value: &str) {
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
}

/// A line (or brace group within a line) that did not yield a relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub line: String,
    pub reason: String,
}

impl ParseFailure {
    fn new(line: &str, reason: impl Into<String>) -> Self {
        ParseFailure { line: line.to_owned(), reason: reason.into() }
    }
}

/// Splits `completion_text` into lines and extracts every brace object with
/// exactly the five relation keys. Never fails; rejected input is returned
/// as failures.
pub fn parse_relation_output(
    completion_text: &str,
    publication_id: &str,
) -> (Vec<RawRelation>, Vec<ParseFailure>) {
    let mut relations = Vec::new();
    let mut failures = Vec::new();
    for line in completion_text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let mut pos = 0;
        let mut groups = 0;
        while let Some(offset) = line[pos..].find('{') {
            let start = pos + offset;
            groups += 1;
            match parse_object(line, start) {
                Ok((fields, end)) => {
                    match relation_from_fields(fields, publication_id) {
                        Ok(r) => relations.push(r),
                        Err(reason) => failures.push(ParseFailure::new(line, reason)),
                    }
                    pos = end;
                }
                Err(reason) => {
                    failures.push(ParseFailure::new(line, reason));
                    pos = line[start..].find('}').map_or(line.len(), |i| start + i + 1);
                }
            }
        }
        if groups == 0 {
            failures.push(ParseFailure::new(line, "no relation object on line"));
        }
    }
    (relations, failures)
}

/// Lossy entry point for raw bytes (e.g. a response body of unknown encoding).
pub fn parse_relation_bytes(
    bytes: &[u8],
    publication_id: &str,
) -> (Vec<RawRelation>, Vec<ParseFailure>) {
    parse_relation_output(&String::from_utf8_lossy(bytes), publication_id)
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn expect(&mut self, want: char) -> Result<(), String> {
        match self.bump() {
            Some(c) if c == want => Ok(()),
            Some(c) => Err(format!("expected `{want}`, found `{c}`")),
            None => Err(format!("expected `{want}`, found end of line")),
        }
    }

    fn string(&mut self) -> Result<String, String> {
        let quote = match self.bump() {
            Some(q @ ('\'' | '"')) => q,
            Some(c) => return Err(format!("expected quoted string, found `{c}`")),
            None => return Err("expected quoted string, found end of line".into()),
        };
        let mut value = String::new();
        loop {
            match self.bump() {
                None => return Err("unterminated string".into()),
                Some(c) if c == quote => return Ok(value),
                Some('\\') => match self.bump() {
                    None => return Err("unterminated string".into()),
                    Some('n') => value.push('\n'),
                    Some('r') => value.push('\r'),
                    Some('t') => value.push('\t'),
                    Some(c) => value.push(c),
                },
                Some(c) => value.push(c),
            }
        }
    }
}

/// Parses `{ "k": "v", ... }` starting at the brace at `start`. Returns the
/// key/value pairs and the byte offset just past the closing brace.
fn parse_object(line: &str, start: usize) -> Result<(Vec<(String, String)>, usize), String> {
    let mut cur = Cursor { src: line, pos: start };
    cur.expect('{')?;
    let mut fields = Vec::new();
    loop {
        cur.skip_ws();
        if cur.peek() == Some('}') {
            cur.bump();
            return Ok((fields, cur.pos));
        }
        let key = cur.string()?;
        cur.skip_ws();
        cur.expect(':')?;
        cur.skip_ws();
        let value = cur.string()?;
        fields.push((key, value));
        cur.skip_ws();
        match cur.bump() {
            Some(',') => {}
            Some('}') => return Ok((fields, cur.pos)),
            Some(c) => return Err(format!("expected `,` or `}}`, found `{c}`")),
            None => return Err("unterminated object".into()),
        }
    }
}

fn relation_from_fields(
    fields: Vec<(String, String)>,
    publication_id: &str,
) -> Result<RawRelation, String> {
    let mut slots: [Option<String>; 5] = Default::default();
    for (key, value) in fields {
        let Some(idx) = RELATION_KEYS.iter().position(|k| *k == key) else {
            return Err(format!("unexpected key `{key}`"));
        };
        if slots[idx].is_some() {
            return Err(format!("duplicate key `{key}`"));
        }
        if value.trim().is_empty() {
            return Err(format!("empty value for `{key}`"));
        }
        slots[idx] = Some(value);
    }
    if let Some(idx) = slots.iter().position(Option::is_none) {
        return Err(format!("missing key `{}`", RELATION_KEYS[idx]));
    }
    let [r, t1, n1, t2, n2] = slots.map(Option::unwrap_or_default);
    Ok(RawRelation {
        relation_type: r,
        entity1_type: t1,
        entity1_name: n1,
        entity2_type: t2,
        entity2_name: n2,
        publication_id: publication_id.to_owned(),
    })
}

/// A relation whose three labels belong to the ontology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidatedRelation {
    pub relation_type: RelationType,
    pub entity1_type: EntityType,
    pub entity1_name: String,
    pub entity2_type: EntityType,
    pub entity2_name: String,
    pub publication_id: String,
}

impl ValidatedRelation {
    pub fn to_raw(&self) -> RawRelation {
        RawRelation {
            relation_type: self.relation_type.as_str().into(),
            entity1_type: self.entity1_type.as_str().into(),
            entity1_name: self.entity1_name.clone(),
            entity2_type: self.entity2_type.as_str().into(),
            entity2_name: self.entity2_name.clone(),
            publication_id: self.publication_id.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationField {
    RelationType,
    Entity1Type,
    Entity2Type,
}

impl RelationField {
    pub fn key(self) -> &'static str {
        match self {
            RelationField::RelationType => "relation_type",
            RelationField::Entity1Type => "entity1_type",
            RelationField::Entity2Type => "entity2_type",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid {}: `{value}` is not an ontology label", field.key())]
pub struct Rejection {
    pub field: RelationField,
    pub value: String,
}

/// Accepts `r` iff the relation label and both entity labels are in the ontology.
pub fn validate_relation(r: &RawRelation, spec: &OntologySpec) -> Result<ValidatedRelation, Rejection> {
    let reject = |field, value: &str| Rejection { field, value: value.to_owned() };
    let relation_type = spec
        .relation_type(&r.relation_type)
        .ok_or_else(|| reject(RelationField::RelationType, &r.relation_type))?;
    let entity1_type = spec
        .entity_type(&r.entity1_type)
        .ok_or_else(|| reject(RelationField::Entity1Type, &r.entity1_type))?;
    let entity2_type = spec
        .entity_type(&r.entity2_type)
        .ok_or_else(|| reject(RelationField::Entity2Type, &r.entity2_type))?;
    Ok(ValidatedRelation {
        relation_type,
        entity1_type,
        entity1_name: r.entity1_name.clone(),
        entity2_type,
        entity2_name: r.entity2_name.clone(),
        publication_id: r.publication_id.clone(),
    })
}

/// An abstract whose completion could not be obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractFailure {
    pub publication_id: String,
    pub attempts: u32,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub abstract_count: usize,
    pub relation_count: usize,
    /// Validated relations only, in corpus order then completion order.
    pub relations: Vec<RawRelation>,
    pub parse_failures: Vec<ParseFailure>,
    #[serde(default)]
    pub failed_abstracts: Vec<AbstractFailure>,
}

impl ExtractionReport {
    /// Report for one abstract given the model's completion text.
    pub fn from_completion(
        record: &AbstractRecord,
        completion_text: &str,
        spec: &OntologySpec,
    ) -> Self {
        let (parsed, mut parse_failures) =
            parse_relation_output(completion_text, &record.publication_id);
        let mut relations = Vec::with_capacity(parsed.len());
        for raw in parsed {
            match validate_relation(&raw, spec) {
                Ok(_) => relations.push(raw),
                Err(rejection) => parse_failures.push(ParseFailure::new(
                    &raw.to_line(),
                    format!("{rejection}"),
                )),
            }
        }
        ExtractionReport {
            abstract_count: 1,
            relation_count: relations.len(),
            relations,
            parse_failures,
            failed_abstracts: Vec::new(),
        }
    }

    pub fn failed(publication_id: &str, attempts: u32, error: impl Into<String>) -> Self {
        ExtractionReport {
            abstract_count: 1,
            failed_abstracts: alloc::vec![AbstractFailure {
                publication_id: publication_id.to_owned(),
                attempts,
                error: error.into(),
            }],
            ..Default::default()
        }
    }

    /// Appends `other` after `self`, preserving order.
    pub fn merge(&mut self, other: ExtractionReport) {
        self.abstract_count += other.abstract_count;
        self.relations.extend(other.relations);
        self.relation_count = self.relations.len();
        self.parse_failures.extend(other.parse_failures);
        self.failed_abstracts.extend(other.failed_abstracts);
    }

    pub fn merged(reports: impl IntoIterator<Item = ExtractionReport>) -> Self {
        let mut out = ExtractionReport::default();
        for r in reports {
            out.merge(r);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const AFFECT: &str = "{'relation_type': 'affect', 'entity1_type': 'disease', 'entity1_name': 'AMD', 'entity2_type': 'body_part', 'entity2_name': 'retina'}";

    fn rel(r: &str, t1: &str, n1: &str, t2: &str, n2: &str) -> RawRelation {
        RawRelation {
            relation_type: r.into(),
            entity1_type: t1.into(),
            entity1_name: n1.into(),
            entity2_type: t2.into(),
            entity2_name: n2.into(),
            publication_id: "P1".into(),
        }
    }

    #[test]
    fn parses_example_line() {
        let (rels, fails) = parse_relation_output(AFFECT, "P1");
        assert!(fails.is_empty());
        assert_eq!(rels, [rel("affect", "disease", "AMD", "body_part", "retina")]);
    }

    #[test]
    fn empty_completion() {
        assert_eq!(parse_relation_output("", "P1"), (Vec::new(), Vec::new()));
        assert_eq!(parse_relation_output("\n  \n\t\n", "P1"), (Vec::new(), Vec::new()));
    }

    #[test]
    fn extra_key_is_a_failure() {
        let line = "{'relation_type': 'affect', 'entity1_type': 'disease', 'entity1_name': 'AMD', 'entity2_type': 'body_part', 'entity2_name': 'retina', 'confidence': '0.9'}";
        let (rels, fails) = parse_relation_output(line, "P1");
        assert!(rels.is_empty());
        assert_eq!(fails.len(), 1);
        assert!(fails[0].reason.contains("unexpected key"));
    }

    #[test]
    fn double_quotes_and_key_order() {
        let line = r#"{"entity2_name": "retina", "relation_type": "affect", "entity1_type": "disease", "entity1_name": "AMD", "entity2_type": "body_part"}"#;
        let (rels, fails) = parse_relation_output(line, "P1");
        assert!(fails.is_empty());
        assert_eq!(rels, [rel("affect", "disease", "AMD", "body_part", "retina")]);
    }

    #[test]
    fn several_groups_on_one_line_and_surrounding_noise() {
        let text = alloc::format!("1. {AFFECT}, {AFFECT}\nHere are the relations:\n\n");
        let (rels, fails) = parse_relation_output(&text, "P1");
        assert_eq!(rels.len(), 2);
        assert_eq!(fails.len(), 1);
        assert_eq!(fails[0].line, "Here are the relations:");
    }

    #[test]
    fn malformed_objects() {
        for (line, reason) in [
            ("{'relation_type': 'affect'", "unterminated"),
            ("{'relation_type': affect}", "expected quoted string"),
            ("{'relation_type': 'a', 'relation_type': 'b'}", "duplicate key"),
            ("{'relation_type': 'affect'}", "missing key `entity1_type`"),
            ("{'relation_type': ' ', 'entity1_type': 'disease', 'entity1_name': 'AMD', 'entity2_type': 'body_part', 'entity2_name': 'retina'}", "empty value"),
            ("{}", "missing key"),
        ] {
            let (rels, fails) = parse_relation_output(line, "P1");
            assert!(rels.is_empty(), "{line}");
            assert_eq!(fails.len(), 1, "{line}");
            assert!(fails[0].reason.contains(reason), "{line}: {}", fails[0].reason);
        }
    }

    #[test]
    fn quotes_in_names_round_trip() {
        let r = rel("cause", "disease", "Crohn's \"disease\"", "symptom", "a\\b\nc");
        let (rels, fails) = parse_relation_output(&r.to_line(), "P1");
        assert!(fails.is_empty(), "{fails:?}");
        assert_eq!(rels, [r]);
    }

    #[test]
    fn validation() {
        let spec = OntologySpec::default();
        let ok = validate_relation(&rel("cause", "disease", "AMD", "symptom", "vision loss"), &spec);
        assert!(ok.is_ok());
        let bad = validate_relation(&rel("correlates_with", "disease", "AMD", "symptom", "x"), &spec);
        assert_eq!(bad.unwrap_err().field, RelationField::RelationType);
        let bad = validate_relation(&rel("cause", "Disease", "AMD", "symptom", "x"), &spec);
        assert_eq!(bad.unwrap_err().field, RelationField::Entity1Type);
        let bad = validate_relation(&rel("cause", "disease", "AMD", "sign", "x"), &spec);
        assert_eq!(bad.unwrap_err().field, RelationField::Entity2Type);
    }

    #[test]
    fn report_from_example_completion() {
        let spec = OntologySpec::default();
        let record = AbstractRecord {
            publication_id: "NCT01291121".into(),
            text: "AMD affects the retina and causes vision loss.".into(),
            source_url: None,
        };
        let completion = "{'relation_type': 'affect', 'entity1_type': 'disease', 'entity1_name': 'AMD', 'entity2_type': 'body_part', 'entity2_name': 'retina'}\n{'relation_type': 'cause', 'entity1_type': 'disease', 'entity1_name': 'AMD', 'entity2_type': 'symptom', 'entity2_name': 'vision loss'}\n{'relation_type': 'linked', 'entity1_type': 'disease', 'entity1_name': 'AMD', 'entity2_type': 'symptom', 'entity2_name': 'x'}";
        let report = ExtractionReport::from_completion(&record, completion, &spec);
        assert_eq!(report.relation_count, 2);
        assert_eq!(report.relations.len(), 2);
        assert_eq!(report.parse_failures.len(), 1);
        assert!(report.relations.iter().all(|r| r.publication_id == "NCT01291121"));

        let prose = ExtractionReport::from_completion(&record, "AMD is bad for you.", &spec);
        assert_eq!(prose.relation_count, 0);
        assert!(!prose.parse_failures.is_empty());
    }

    #[test]
    fn merge_keeps_order_and_counts() {
        let spec = OntologySpec::default();
        let a = AbstractRecord { publication_id: "A".into(), text: "t".into(), source_url: None };
        let b = AbstractRecord { publication_id: "B".into(), text: "t".into(), source_url: None };
        let merged = ExtractionReport::merged([
            ExtractionReport::from_completion(&a, AFFECT, &spec),
            ExtractionReport::failed("X", 4, "timeout"),
            ExtractionReport::from_completion(&b, AFFECT, &spec),
        ]);
        assert_eq!(merged.abstract_count, 3);
        assert_eq!(merged.relation_count, 2);
        let ids: Vec<&str> = merged.relations.iter().map(|r| r.publication_id.as_str()).collect();
        assert_eq!(ids, ["A", "B"]);
        assert_eq!(merged.failed_abstracts.len(), 1);
    }

    #[test]
    fn abstract_record_invariants() {
        let mut r = AbstractRecord { publication_id: " ".into(), text: "x".into(), source_url: None };
        assert_eq!(r.validate(), Err(RecordError::EmptyPublicationId));
        r.publication_id = "P".into();
        r.text = "".into();
        assert!(r.validate().is_err());
    }

    fn name() -> impl Strategy<Value = String> {
        any::<String>().prop_filter("non-blank", |s| !s.trim().is_empty())
    }

    proptest! {
        #[test]
        fn parser_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            let _ = parse_relation_bytes(&bytes, "P");
        }

        #[test]
        fn serialize_parse_round_trip(
            r in name(), t1 in name(), n1 in name(), t2 in name(), n2 in name()
        ) {
            let raw = RawRelation {
                relation_type: r, entity1_type: t1, entity1_name: n1,
                entity2_type: t2, entity2_name: n2, publication_id: "P".into(),
            };
            let (rels, fails) = parse_relation_output(&raw.to_line(), "P");
            prop_assert!(fails.is_empty(), "{:?}", fails);
            prop_assert_eq!(rels, alloc::vec![raw]);
        }
    }
}

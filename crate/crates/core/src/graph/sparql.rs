//! SPARQL 1.1 `INSERT DATA` generation.

use alloc::string::String;
use core::fmt::Write;

use super::{Term, Triple};

/// Renders one `INSERT DATA` update holding every triple in order.
pub fn to_sparql_insert(triples: &[Triple]) -> String {
    if triples.is_empty() {
        return "INSERT DATA { }".into();
    }
    let mut out = String::from("INSERT DATA {\n");
    for t in triples {
        let _ = write!(out, "  <{}> <{}> ", t.subject, t.predicate);
        write_object(&mut out, &t.object);
        out.push_str(" .\n");
    }
    out.push('}');
    out
}

fn write_object(out: &mut String, term: &Term) {
    match term {
        Term::Iri(iri) => {
            let _ = write!(out, "<{iri}>");
        }
        Term::Literal(lit) => {
            out.push('"');
            for c in lit.value.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\r' => out.push_str("\\r"),
                    '\t' => out.push_str("\\t"),
                    '\u{8}' => out.push_str("\\b"),
                    '\u{c}' => out.push_str("\\f"),
                    c => out.push(c),
                }
            }
            out.push('"');
            if let Some(lang) = &lit.language {
                let _ = write!(out, "@{lang}");
            } else if let Some(dt) = &lit.datatype {
                let _ = write!(out, "^^<{dt}>");
            }
        }
    }
}

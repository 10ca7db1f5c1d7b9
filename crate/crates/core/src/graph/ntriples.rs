//! Canonical N-Triples export and a loader for the subset we emit
//! (IRIs and literals; no blank nodes).

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::vocab::XSD_STRING;
use super::{GraphStore, Iri, Literal, Term, Triple};

/// One triple per line, lines sorted bytewise, each ending in `\n`.
pub fn serialize_ntriples(store: &GraphStore) -> String {
    let mut lines: Vec<String> = store.iter().map(|t| triple_line(&t)).collect();
    lines.sort_unstable();
    let mut out = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn triple_line(t: &Triple) -> String {
    let mut line = String::new();
    let _ = write!(line, "<{}> <{}> ", t.subject, t.predicate);
    write_term(&mut line, &t.object);
    line.push_str(" .");
    line
}

/// Writes `term` in N-Triples syntax (canonical escaping).
pub fn write_term(out: &mut String, term: &Term) {
    match term {
        Term::Iri(iri) => {
            let _ = write!(out, "<{iri}>");
        }
        Term::Literal(lit) => {
            out.push('"');
            for c in lit.value.chars() {
                match c {
                    '\u{8}' => out.push_str("\\b"),
                    '\t' => out.push_str("\\t"),
                    '\n' => out.push_str("\\n"),
                    '\u{c}' => out.push_str("\\f"),
                    '\r' => out.push_str("\\r"),
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    c if c <= '\u{1f}' || c == '\u{7f}' => {
                        let _ = write!(out, "\\u{:04X}", c as u32);
                    }
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

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("N-Triples line {line}: {message}")]
pub struct NTriplesError {
    pub line: usize,
    pub message: String,
}

/// Loads N-Triples text into a fresh store.
pub fn parse_ntriples(text: &str) -> Result<GraphStore, NTriplesError> {
    let mut store = GraphStore::new();
    for (idx, raw) in text.lines().enumerate() {
        let err = |message: &str| NTriplesError { line: idx + 1, message: message.to_string() };
        let mut p = LineParser { s: raw, pos: 0 };
        p.skip_ws();
        if p.done() || p.peek() == Some('#') {
            continue;
        }
        let subject = p.iri().map_err(|m| err(&m))?;
        p.skip_ws();
        let predicate = p.iri().map_err(|m| err(&m))?;
        p.skip_ws();
        let object = match p.peek() {
            Some('<') => Term::Iri(p.iri().map_err(|m| err(&m))?),
            Some('"') => Term::Literal(p.literal().map_err(|m| err(&m))?),
            Some('_') => return Err(err("blank nodes are not supported")),
            _ => return Err(err("expected IRI or literal object")),
        };
        p.skip_ws();
        if p.bump() != Some('.') {
            return Err(err("expected `.`"));
        }
        p.skip_ws();
        if !(p.done() || p.peek() == Some('#')) {
            return Err(err("trailing content after `.`"));
        }
        store.insert(Triple { subject, predicate, object }).expect("fresh store is not sealed");
    }
    Ok(store)
}

struct LineParser<'a> {
    s: &'a str,
    pos: usize,
}

impl LineParser<'_> {
    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn done(&self) -> bool {
        self.pos >= self.s.len()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.bump();
        }
    }

    fn iri(&mut self) -> Result<Iri, String> {
        if self.bump() != Some('<') {
            return Err("expected `<`".into());
        }
        let mut value = String::new();
        loop {
            match self.bump() {
                None => return Err("unterminated IRI".into()),
                Some('>') => break,
                Some('\\') => value.push(self.uchar()?),
                Some(c) => value.push(c),
            }
        }
        Iri::new(value).map_err(|e| e.to_string())
    }

    fn uchar(&mut self) -> Result<char, String> {
        let width = match self.bump() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return Err("invalid escape".into()),
        };
        let start = self.pos;
        for _ in 0..width {
            if !matches!(self.bump(), Some(c) if c.is_ascii_hexdigit()) {
                return Err("invalid unicode escape".into());
            }
        }
        u32::from_str_radix(&self.s[start..self.pos], 16)
            .ok()
            .and_then(char::from_u32)
            .ok_or_else(|| "invalid code point".into())
    }

    fn literal(&mut self) -> Result<Literal, String> {
        self.bump();
        let mut value = String::new();
        loop {
            match self.bump() {
                None => return Err("unterminated literal".into()),
                Some('"') => break,
                Some('\\') => match self.peek() {
                    Some('u' | 'U') => value.push(self.uchar()?),
                    Some(c) => {
                        self.bump();
                        value.push(match c {
                            't' => '\t',
                            'b' => '\u{8}',
                            'n' => '\n',
                            'r' => '\r',
                            'f' => '\u{c}',
                            '"' => '"',
                            '\'' => '\'',
                            '\\' => '\\',
                            _ => return Err("invalid escape".into()),
                        });
                    }
                    None => return Err("unterminated literal".into()),
                },
                Some(c) => value.push(c),
            }
        }
        let mut lit = Literal::plain(value);
        match self.peek() {
            Some('@') => {
                self.bump();
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '-') {
                    self.bump();
                }
                if self.pos == start {
                    return Err("empty language tag".into());
                }
                lit.language = Some(self.s[start..self.pos].into());
            }
            Some('^') => {
                self.bump();
                if self.bump() != Some('^') {
                    return Err("expected `^^`".into());
                }
                let dt = self.iri()?;
                if dt.as_str() != XSD_STRING {
                    lit.datatype = Some(dt);
                }
            }
            _ => {}
        }
        Ok(lit)
    }
}

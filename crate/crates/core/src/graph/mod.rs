//! RDF model and in-process triple store.
//!
//! Refined relations become reified `Relation` nodes carrying PROV-O
//! provenance (see [`relation_to_triples`]). The store keeps three nested
//! indexes (SPO, POS, OSP) so every lookup the retrieval layer needs is a
//! map walk. After loading, [`GraphStore::seal`] makes it read-only.

mod mint;
mod ntriples;
mod query;
mod sparql;
pub mod vocab;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use mint::{canonical_relation_key, mint_relation_iri, percent_encode, relation_to_triples};
pub use ntriples::{parse_ntriples, serialize_ntriples, write_term, NTriplesError};
pub use query::{check_integrity, EntityNode, PublicationNode, RelationRow};
pub use sparql::to_sparql_insert;
pub use vocab::Vocabulary;

/// An absolute IRI with no characters that N-Triples or SPARQL forbid
/// inside `<...>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Iri(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid IRI `{0}`")]
pub struct IriError(pub String);

impl Iri {
    pub fn new(value: impl Into<String>) -> Result<Self, IriError> {
        let value = value.into();
        if is_absolute_iri(&value) {
            Ok(Iri(value))
        } else {
            Err(IriError(value))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Appends `suffix` to this IRI. `suffix` must already be IRI-safe.
    pub(crate) fn join(&self, suffix: &str) -> Iri {
        let mut s = self.0.clone();
        s.push_str(suffix);
        debug_assert!(is_absolute_iri(&s), "{s}");
        Iri(s)
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn is_absolute_iri(s: &str) -> bool {
    let Some((scheme, rest)) = s.split_once(':') else {
        return false;
    };
    let mut chars = scheme.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
        && !rest.is_empty()
        && !s.chars().any(|c| {
            c <= ' ' || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\')
        })
        && percent_escapes_ok(s)
}

fn percent_escapes_ok(s: &str) -> bool {
    let b = s.as_bytes();
    b.iter().enumerate().filter(|(_, c)| **c == b'%').all(|(i, _)| {
        b.len() > i + 2 && b[i + 1].is_ascii_hexdigit() && b[i + 2].is_ascii_hexdigit()
    })
}

/// An RDF literal. Plain strings carry neither datatype nor language.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub value: String,
    pub datatype: Option<Iri>,
    pub language: Option<String>,
}

impl Literal {
    pub fn plain(value: impl Into<String>) -> Self {
        Literal { value: value.into(), datatype: None, language: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(Iri),
    Literal(Literal),
}

impl Term {
    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Term::Iri(i) => Some(i),
            Term::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(l) => Some(l),
            Term::Iri(_) => None,
        }
    }
}

impl From<Iri> for Term {
    fn from(i: Iri) -> Self {
        Term::Iri(i)
    }
}

impl From<Literal> for Term {
    fn from(l: Literal) -> Self {
        Term::Literal(l)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Iri, object: impl Into<Term>) -> Self {
        Triple { subject, predicate, object: object.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("graph store is sealed; writes are not allowed")]
    Sealed,
}

/// Set of triples with SPO, POS and OSP indexes.
#[derive(Debug, Clone, Default)]
pub struct GraphStore {
    spo: BTreeMap<Iri, BTreeMap<Iri, BTreeSet<Term>>>,
    pos: BTreeMap<Iri, BTreeMap<Term, BTreeSet<Iri>>>,
    osp: BTreeMap<Term, BTreeMap<Iri, BTreeSet<Iri>>>,
    len: usize,
    sealed: bool,
}

impl PartialEq for GraphStore {
    fn eq(&self, other: &Self) -> bool {
        self.spo == other.spo
    }
}

impl Eq for GraphStore {}

impl GraphStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `t`; returns whether it was new.
    pub fn insert(&mut self, t: Triple) -> Result<bool, GraphError> {
        if self.sealed {
            return Err(GraphError::Sealed);
        }
        let fresh = self
            .spo
            .entry(t.subject.clone())
            .or_default()
            .entry(t.predicate.clone())
            .or_default()
            .insert(t.object.clone());
        if fresh {
            self.pos
                .entry(t.predicate.clone())
                .or_default()
                .entry(t.object.clone())
                .or_default()
                .insert(t.subject.clone());
            self.osp.entry(t.object).or_default().entry(t.subject).or_default().insert(t.predicate);
            self.len += 1;
        }
        Ok(fresh)
    }

    pub fn extend(&mut self, triples: impl IntoIterator<Item = Triple>) -> Result<usize, GraphError> {
        let mut added = 0;
        for t in triples {
            added += usize::from(self.insert(t)?);
        }
        Ok(added)
    }

    /// Switches the store to read-only mode. Irreversible.
    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.spo
            .get(&t.subject)
            .and_then(|p| p.get(&t.predicate))
            .is_some_and(|o| o.contains(&t.object))
    }

    /// All triples in (subject, predicate, object) order.
    pub fn iter(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo.iter().flat_map(|(s, ps)| {
            ps.iter().flat_map(move |(p, os)| {
                os.iter().map(move |o| Triple::new(s.clone(), p.clone(), o.clone()))
            })
        })
    }

    pub fn objects<'a>(&'a self, subject: &Iri, predicate: &Iri) -> impl Iterator<Item = &'a Term> + 'a {
        self.spo
            .get(subject)
            .and_then(|p| p.get(predicate))
            .into_iter()
            .flat_map(|os| os.iter())
    }

    pub fn subjects<'a>(&'a self, predicate: &Iri, object: &Term) -> impl Iterator<Item = &'a Iri> + 'a {
        self.pos
            .get(predicate)
            .and_then(|o| o.get(object))
            .into_iter()
            .flat_map(|ss| ss.iter())
    }

    /// Every (subject, object) pair for `predicate`, in object then subject order.
    pub fn pairs<'a>(&'a self, predicate: &Iri) -> impl Iterator<Item = (&'a Iri, &'a Term)> + 'a {
        self.pos
            .get(predicate)
            .into_iter()
            .flat_map(|os| os.iter().flat_map(|(o, ss)| ss.iter().map(move |s| (s, o))))
    }

    /// Predicates linking `subject` to `object`.
    pub fn predicates<'a>(&'a self, subject: &Iri, object: &Term) -> impl Iterator<Item = &'a Iri> + 'a {
        self.osp
            .get(object)
            .and_then(|s| s.get(subject))
            .into_iter()
            .flat_map(|ps| ps.iter())
    }

    pub fn to_vec(&self) -> Vec<Triple> {
        self.iter().collect()
    }
}

impl FromIterator<Triple> for GraphStore {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut store = GraphStore::new();
        store.extend(iter).expect("fresh store is not sealed");
        store
    }
}

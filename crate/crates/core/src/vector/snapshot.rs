//! Binary index snapshot.
//!
//! Layout (little endian): `KGV1`, `u32` dim, `u32` count, then per record a
//! `u8` class tag, `u32`-length-prefixed UTF-8 strings (id, then the class
//! fields) and `dim` `f32` components.

use alloc::string::String;
use alloc::vec::Vec;

use super::{
    DocClass, Document, EmbeddingVector, EntityDoc, PublicationDoc, RelationDoc, VectorError,
    VectorIndex,
};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"KGV1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SnapshotError {
    #[error("not a vector index snapshot")]
    BadMagic,
    #[error("snapshot truncated at byte {0}")]
    Truncated(usize),
    #[error("unknown document class tag {0}")]
    BadTag(u8),
    #[error("invalid UTF-8 in string at byte {0}")]
    BadUtf8(usize),
    #[error("{0} trailing bytes after last record")]
    TrailingBytes(usize),
    #[error(transparent)]
    Vector(#[from] VectorError),
}

fn tag(class: DocClass) -> u8 {
    match class {
        DocClass::Entity => 0,
        DocClass::Relation => 1,
        DocClass::Publication => 2,
    }
}

fn put_u32(out: &mut Vec<u8>, n: usize) {
    out.extend_from_slice(&(n as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

pub fn encode_snapshot(index: &VectorIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(SNAPSHOT_MAGIC);
    put_u32(&mut out, index.dim());
    put_u32(&mut out, index.len());
    for d in index.docs() {
        out.push(tag(d.doc.class()));
        put_str(&mut out, &d.id);
        match &d.doc {
            Document::Entity(e) => {
                put_str(&mut out, &e.name);
                put_str(&mut out, &e.entity_type);
            }
            Document::Relation(r) => {
                put_str(&mut out, &r.predicate);
                put_str(&mut out, &r.subject);
                put_str(&mut out, &r.object);
                put_str(&mut out, &r.publication);
            }
            Document::Publication(p) => put_str(&mut out, &p.publication_id),
        }
        for x in d.vector.values() {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or(SnapshotError::Truncated(self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, SnapshotError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, SnapshotError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f32(&mut self) -> Result<f32, SnapshotError> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn string(&mut self) -> Result<String, SnapshotError> {
        let len = self.u32()?;
        let at = self.pos;
        let b = self.take(len)?;
        core::str::from_utf8(b).map(String::from).map_err(|_| SnapshotError::BadUtf8(at))
    }
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<VectorIndex, SnapshotError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| SnapshotError::BadMagic)? != SNAPSHOT_MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let dim = r.u32()?;
    let count = r.u32()?;
    let mut index = VectorIndex::new(dim)?;
    for _ in 0..count {
        let t = r.u8()?;
        let id = r.string()?;
        let doc = match t {
            0 => Document::Entity(EntityDoc { name: r.string()?, entity_type: r.string()? }),
            1 => Document::Relation(RelationDoc {
                predicate: r.string()?,
                subject: r.string()?,
                object: r.string()?,
                publication: r.string()?,
            }),
            2 => Document::Publication(PublicationDoc { publication_id: r.string()? }),
            other => return Err(SnapshotError::BadTag(other)),
        };
        let mut values = Vec::with_capacity(dim.min(1 << 16));
        for _ in 0..dim {
            values.push(f64::from(r.f32()?));
        }
        index.insert(id, doc, EmbeddingVector::new(values)?)?;
    }
    if r.pos != bytes.len() {
        return Err(SnapshotError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(index)
}

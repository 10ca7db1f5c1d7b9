//! Text embedding.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{EmbeddingVector, VectorError};

pub const DEFAULT_DIM: usize = 384;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("embedding backend failed: {0}")]
    Backend(String),
}

/// Maps text to a fixed-dimension vector.
pub trait Embedder {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;
}

/// Deterministic hashed character-trigram embedder for offline use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FallbackEmbedder {
    dim: usize,
}

impl FallbackEmbedder {
    pub fn new(dim: usize) -> Result<Self, VectorError> {
        if dim == 0 {
            return Err(VectorError::InvalidDimension);
        }
        Ok(FallbackEmbedder { dim })
    }
}

impl Default for FallbackEmbedder {
    fn default() -> Self {
        FallbackEmbedder { dim: DEFAULT_DIM }
    }
}

fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for b in *part {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

impl Embedder for FallbackEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let lowered = text.to_lowercase();
        let words: Vec<&str> = lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut acc = vec![0.0f64; self.dim];
        let mut add = |h: u64, weight: f64| {
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            acc[bucket] += sign * weight;
        };
        for word in &words {
            add(fnv1a(&[b"w:", word.as_bytes()]), 2.0);
            let padded: Vec<char> = core::iter::once(' ')
                .chain(word.chars())
                .chain(core::iter::once(' '))
                .collect();
            let mut buf = [0u8; 12];
            for tri in padded.windows(3) {
                let mut n = 0;
                for c in tri {
                    n += c.encode_utf8(&mut buf[n..]).len();
                }
                add(fnv1a(&[b"t:", &buf[..n]]), 1.0);
            }
        }
        let norm = libm::sqrt(acc.iter().map(|x| x * x).sum());
        if norm == 0.0 {
            return Err(VectorError::ZeroVector.into());
        }
        for x in &mut acc {
            *x /= norm;
        }
        Ok(EmbeddingVector::new(acc)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::cosine_similarity;

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a(&[b""]), 0xcbf29ce484222325);
        assert_eq!(fnv1a(&[b"a"]), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(&[b"foobar"]), 0x85944171f73967e8);
        assert_eq!(fnv1a(&[b"foo", b"bar"]), fnv1a(&[b"foobar"]));
    }

    #[test]
    fn deterministic_normalized_and_case_insensitive() {
        let e = FallbackEmbedder::default();
        let a = e.embed("Age-related macular degeneration").unwrap();
        assert_eq!(a.dim(), DEFAULT_DIM);
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert_eq!(a, e.embed("age-related MACULAR degeneration").unwrap());
        assert_eq!(e.embed("  ... "), Err(EmbedError::EmptyText));
        assert_eq!(e.embed(""), Err(EmbedError::EmptyText));
    }

    #[test]
    fn related_text_scores_higher() {
        let e = FallbackEmbedder::default();
        let q = e.embed("what causes macular degeneration").unwrap();
        let near = e.embed("macular degeneration (disease)").unwrap();
        let far = e.embed("smoking (risk_factor)").unwrap();
        assert!(cosine_similarity(&q, &near).unwrap() > cosine_similarity(&q, &far).unwrap());
    }

    #[test]
    fn custom_dim() {
        let e = FallbackEmbedder::new(16).unwrap();
        assert_eq!(e.embed("vegf").unwrap().dim(), 16);
        assert!(FallbackEmbedder::new(0).is_err());
    }
}

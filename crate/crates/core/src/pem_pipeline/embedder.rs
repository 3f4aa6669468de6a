use std::collections::HashMap;

use thiserror::Error;

use super::http::TransportError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("consistency needs at least 2 texts, got {0}")]
    TooFewTexts(usize),
    #[error("embedder returned {found} vectors for {expected} texts")]
    CountMismatch { expected: usize, found: usize },
    #[error("embedding {0} has non-finite entries")]
    NonFinite(usize),
    #[error("embedding {0} is the zero vector")]
    ZeroVector(usize),
    #[error("embeddings have different dimensions")]
    DimensionMismatch,
    #[error("no embedding known for text {0:?}")]
    UnknownText(String),
    #[error("embedding endpoint: {0}")]
    Transport(#[from] TransportError),
    #[error("malformed embedding response: {0}")]
    Malformed(String),
}

/// Maps texts to vectors. Implementations must be deterministic for the
/// annotation output to be reproducible.
pub trait TextEmbedder: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Fixed text → vector table.
#[derive(Clone, Debug, Default)]
pub struct LookupEmbedder {
    table: HashMap<String, Vec<f64>>,
}

impl LookupEmbedder {
    pub fn new<S: Into<String>>(entries: impl IntoIterator<Item = (S, Vec<f64>)>) -> Self {
        LookupEmbedder { table: entries.into_iter().map(|(k, v)| (k.into(), v)).collect() }
    }
}

impl TextEmbedder for LookupEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        texts
            .iter()
            .map(|t| self.table.get(t).cloned().ok_or_else(|| EmbedError::UnknownText(t.clone())))
            .collect()
    }
}

/// Offline bag-of-words embedder: lowercase alphanumeric words hashed (FNV-1a)
/// into signed buckets. Stable across platforms and releases.
#[derive(Clone, Copy, Debug)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder { dim: 512 }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl HashingEmbedder {
    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim.max(1)];
        let lower = text.to_lowercase();
        for word in lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
            let h = fnv1a(word.as_bytes());
            let bucket = (h % v.len() as u64) as usize;
            v[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        v
    }
}

impl TextEmbedder for HashingEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn hashing_is_case_and_punctuation_insensitive() {
        let e = HashingEmbedder::default();
        assert_eq!(e.embed_one("The dog, barking!"), e.embed_one("the DOG barking"));
        assert_ne!(e.embed_one("dog"), e.embed_one("cat"));
        assert!(e.embed_one("...").iter().all(|&x| x == 0.0));
    }

    #[test]
    fn lookup_unknown_text() {
        let e = LookupEmbedder::new([("a", vec![1.0])]);
        assert!(matches!(e.embed(&["b".into()]), Err(EmbedError::UnknownText(_))));
    }
}

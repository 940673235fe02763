//! Fixed-dimension text embeddings behind a provider interface.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array1;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text;

/// Default embedding width, matching BERT-base hidden states.
pub const DEFAULT_DIM: usize = 768;

pub type Vector = Array1<f64>;

pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn name(&self) -> &str;
    /// Deterministic embedding of `text`. Blank input is rejected.
    fn encode(&self, text: &str) -> Result<Vector>;
    /// Lookups that had to fall back to hashing.
    fn miss_count(&self) -> u64 {
        0
    }
}

/// Signed feature hashing of lowercased tokens, L2-normalized.
///
/// Input without tokens maps to the first basis vector.
pub fn hash_embed(text: &str, dim: usize, seed: u64) -> Vector {
    assert!(dim > 0, "dimension must be positive");
    let mut v = Array1::<f64>::zeros(dim);
    for tok in text::tokens(text) {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(tok.as_bytes());
        let d = h.finalize();
        let bucket = u64::from_le_bytes(d[..8].try_into().unwrap()) % dim as u64;
        let sign = if d[8] & 1 == 0 { 1.0 } else { -1.0 };
        v[bucket as usize] += sign;
    }
    let norm = v.dot(&v).sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
    } else {
        v /= norm;
    }
    v
}

#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "dimension must be positive");
        HashEmbedder { dim, seed }
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &str {
        "hash"
    }

    fn encode(&self, text: &str) -> Result<Vector> {
        if text.trim().is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(hash_embed(text, self.dim, self.seed))
    }
}

/// Precomputed vectors keyed by the SHA-256 of the exact text; misses fall
/// back to [`hash_embed`] and are counted.
#[derive(Debug)]
pub struct FileEmbedder {
    dim: usize,
    table: HashMap<String, Vec<f32>>,
    fallback: HashEmbedder,
    misses: AtomicU64,
}

impl FileEmbedder {
    pub fn load(path: impl AsRef<Path>, expected_dim: usize, fallback_seed: u64) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&raw, path, expected_dim, fallback_seed)
    }

    pub fn parse(raw: &str, path: &Path, expected_dim: usize, fallback_seed: u64) -> Result<Self> {
        let malformed = |line: usize, message: String| Error::Malformed {
            module: "embeddings",
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = raw.lines().enumerate();
        let dim = match lines.next() {
            Some((_, header)) => header
                .trim()
                .strip_prefix("dim=")
                .and_then(|d| d.parse::<usize>().ok())
                .ok_or_else(|| malformed(1, format!("expected `dim=<d>` header, got `{header}`")))?,
            None => return Err(malformed(1, "missing `dim=` header".into())),
        };
        if dim != expected_dim {
            return Err(Error::DimensionMismatch {
                expected: expected_dim,
                found: dim,
            });
        }
        let mut table = HashMap::new();
        for (i, line) in lines {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() {
                continue;
            }
            let (key, values) = line
                .split_once('\t')
                .ok_or_else(|| malformed(i + 1, "expected `<digest>\\t<values>`".into()))?;
            if key.len() != 64 || !key.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(malformed(i + 1, format!("bad digest `{key}`")));
            }
            let vals = values
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(str::parse::<f32>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| malformed(i + 1, e.to_string()))?;
            if vals.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: vals.len(),
                });
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(malformed(i + 1, "non-finite value".into()));
            }
            table.insert(key.to_ascii_lowercase(), vals);
        }
        Ok(FileEmbedder {
            dim,
            table,
            fallback: HashEmbedder::new(dim, fallback_seed),
            misses: AtomicU64::new(0),
        })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl EmbeddingProvider for FileEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &str {
        "file"
    }

    fn encode(&self, text: &str) -> Result<Vector> {
        if text.trim().is_empty() {
            return Err(Error::EmptyInput);
        }
        match self.table.get(&text::digest_hex(text)) {
            Some(v) => Ok(v.iter().map(|&x| f64::from(x)).collect()),
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                self.fallback.encode(text)
            }
        }
    }

    fn miss_count(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}

/// Render texts and vectors in the embedding file format.
pub fn write_embedding_file<'a, I>(dim: usize, entries: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a [f32])>,
{
    let mut out = format!("dim={dim}\n");
    for (text, vals) in entries {
        out.push_str(&text::digest_hex(text));
        out.push('\t');
        let joined: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
        out.push_str(&joined.join(" "));
        out.push('\n');
    }
    out
}

pub fn cosine(a: &Vector, b: &Vector) -> f64 {
    let na = a.dot(a).sqrt();
    let nb = b.dot(b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (a.dot(b) / (na * nb)).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hash_is_deterministic_and_unit() {
        let e = HashEmbedder::new(DEFAULT_DIM, 3);
        let a = e.encode("When was Avengers: Endgame released?").unwrap();
        let b = e.encode("When was Avengers: Endgame released?").unwrap();
        assert_eq!(a, b);
        assert!((a.dot(&a).sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn repeated_token_normalizes_away() {
        assert_eq!(hash_embed("a a", 64, 0), hash_embed("a", 64, 0));
    }

    #[test]
    fn tokenless_maps_to_first_basis() {
        let v = hash_embed("###", 16, 0);
        assert_eq!(v[0], 1.0);
        assert_eq!(v.sum(), 1.0);
        assert!(matches!(HashEmbedder::new(16, 0).encode("   "), Err(Error::EmptyInput)));
    }

    #[test]
    fn unrelated_sentences_have_finite_cosine() {
        let a = hash_embed("who directed the film", DEFAULT_DIM, 0);
        let b = hash_embed("released on which date", DEFAULT_DIM, 0);
        let c = cosine(&a, &b);
        assert!(c.is_finite() && c > -1.0 && c < 1.0, "{c}");
    }

    #[test]
    fn file_provider_hits_and_misses() {
        let v1 = [0.5f32, -0.25, 1.0, 0.0];
        let v2 = [1.0f32, 2.0, 3.0, 4.0];
        let raw = write_embedding_file(4, [("alpha", &v1[..]), ("beta gamma", &v2[..]), ("x", &v1[..])]);
        let p = FileEmbedder::parse(&raw, Path::new("e.txt"), 4, 0).unwrap();
        assert_eq!(p.dim(), 4);
        assert_eq!(p.len(), 3);
        let got = p.encode("beta gamma").unwrap();
        assert_eq!(got.to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.miss_count(), 0);
        let miss = p.encode("absent").unwrap();
        assert_eq!(miss, hash_embed("absent", 4, 0));
        assert_eq!(p.miss_count(), 1);
    }

    #[test]
    fn file_provider_rejects_wrong_dim() {
        let raw = write_embedding_file(4, [("alpha", &[0.0f32, 0.0, 0.0, 1.0][..])]);
        let err = FileEmbedder::parse(&raw, Path::new("e"), DEFAULT_DIM, 0).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 768, found: 4 }));
        let bad = "dim=2\nnot-a-digest\t1 2\n";
        assert!(FileEmbedder::parse(bad, Path::new("e"), 2, 0).is_err());
    }

    proptest! {
        #[test]
        fn hash_norm_is_one(s in "\\PC{0,40}", seed in 0u64..4) {
            let v = hash_embed(&s, 32, seed);
            prop_assert!((v.dot(&v).sqrt() - 1.0).abs() < 1e-9);
        }
    }
}

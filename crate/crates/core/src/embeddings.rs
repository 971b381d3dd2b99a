//! Word vectors with a deterministic hashing fallback, phrase pooling and
//! cosine similarity.

use std::collections::HashMap;
use std::path::Path;

use crate::corpus::read_text;
use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_SEED: u64 = 42;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingProvider {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
    fallback_enabled: bool,
    seed: u64,
}

impl EmbeddingProvider {
    /// A provider with no table: every word gets its hashed vector.
    pub fn hashing(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingProvider {
            dim,
            table: HashMap::new(),
            fallback_enabled: true,
            seed,
        })
    }

    /// Text vectors: a word followed by its components, whitespace separated.
    /// The first line fixes the dimension.
    pub fn load(path: &Path, seed: u64) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string(), seed)
    }

    pub fn parse(text: &str, name: &str, seed: u64) -> Result<Self> {
        let mut table = HashMap::new();
        let mut dim = 0;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().expect("non-blank line");
            let vector = fields
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::parse(name, line_no, "non-numeric vector component"))?;
            if dim == 0 {
                if vector.is_empty() {
                    return Err(Error::parse(name, line_no, "vector has no components"));
                }
                dim = vector.len();
            } else if vector.len() != dim {
                return Err(Error::parse(
                    name,
                    line_no,
                    format!("vector has {} components, expected {dim}", vector.len()),
                ));
            }
            table.insert(word.to_owned(), vector);
        }
        if dim == 0 {
            return Err(Error::parse(name, 1, "no vectors"));
        }
        Ok(EmbeddingProvider {
            dim,
            table,
            fallback_enabled: true,
            seed,
        })
    }

    pub fn with_fallback(mut self, enabled: bool) -> Self {
        self.fallback_enabled = enabled;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.table.get(word).map(Vec::as_slice)
    }

    /// Unit vector built from the word's boundary-padded character trigrams,
    /// each hashed into one of `dim` buckets.
    pub fn fallback_vector(&self, word: &str) -> Vec<f64> {
        let padded: Vec<char> = std::iter::once('<')
            .chain(word.chars())
            .chain(std::iter::once('>'))
            .collect();
        let mut v = vec![0.0; self.dim];
        let mut buf = [0u8; 12];
        for tri in padded.windows(3) {
            let mut len = 0;
            for c in tri {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            let bucket = (fnv1a(self.seed, &buf[..len]) % self.dim as u64) as usize;
            v[bucket] += 1.0;
        }
        let norm = l2_norm(&v);
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }

    /// Table vector, else the hashed fallback when enabled.
    pub fn vector(&self, word: &str) -> Option<Vec<f64>> {
        match self.table.get(word) {
            Some(v) => Some(v.clone()),
            None if self.fallback_enabled => Some(self.fallback_vector(word)),
            None => None,
        }
    }

    /// Mean of the word vectors. Words without a vector are skipped when the
    /// fallback is disabled.
    pub fn phrase_embedding<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<f64>> {
        if words.is_empty() {
            return Err(Error::EmptyPhrase);
        }
        let mut sum = vec![0.0; self.dim];
        let mut n = 0usize;
        for w in words {
            if let Some(v) = self.vector(w.as_ref()) {
                sum.iter_mut().zip(&v).for_each(|(s, x)| *s += x);
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::NoVector(words[0].as_ref().to_owned()));
        }
        sum.iter_mut().for_each(|s| *s /= n as f64);
        Ok(sum)
    }

    /// Embedding of a whitespace-separated phrase such as a gloss.
    pub fn embed_text(&self, text: &str) -> Result<Vec<f64>> {
        let words: Vec<&str> = text.split_whitespace().collect();
        self.phrase_embedding(&words)
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity in [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (nu, nv) = (l2_norm(u), l2_norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Component-wise mean of equally sized vectors.
pub fn mean_vector<'a, I>(vectors: I, dim: usize) -> Result<Option<Vec<f64>>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for v in vectors {
        if v.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: v.len(),
            });
        }
        sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
        n += 1;
    }
    if n == 0 {
        return Ok(None);
    }
    sum.iter_mut().for_each(|s| *s /= n as f64);
    Ok(Some(sum))
}

#[cfg(test)]
mod tests {
    use super::*;

    const VECTORS: &str = "contract 1 0 0 0\nnecklace 0 1 0 0\ndecade 0.5 0.5 0 0.25\n";

    #[test]
    fn loads_table() {
        let p = EmbeddingProvider::parse(VECTORS, "v", 0).unwrap();
        assert_eq!(p.dim(), 4);
        assert_eq!(p.get("decade").unwrap(), [0.5, 0.5, 0.0, 0.25]);
    }

    #[test]
    fn inconsistent_dim_is_an_error() {
        let err = EmbeddingProvider::parse("a 1 0 0 0\nb 1 0 0\n", "v", 0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(EmbeddingProvider::parse("a 1 x\n", "v", 0).is_err());
    }

    #[test]
    fn fallback_is_deterministic_and_unit() {
        let p = EmbeddingProvider::hashing(32, DEFAULT_SEED).unwrap();
        let a = p.fallback_vector("xyz");
        assert_eq!(a, p.fallback_vector("xyz"));
        assert!((l2_norm(&a) - 1.0).abs() < 1e-9);
        let c = cosine(&p.fallback_vector("contract"), &p.fallback_vector("necklace")).unwrap();
        assert!(c < 1.0);
    }

    #[test]
    fn phrase_means() {
        let p = EmbeddingProvider::parse("x 1 0\ny 0 1\n", "v", 0).unwrap();
        assert_eq!(p.phrase_embedding(&["x"]).unwrap(), [1.0, 0.0]);
        assert_eq!(p.phrase_embedding(&["x", "x"]).unwrap(), [1.0, 0.0]);
        assert_eq!(p.phrase_embedding(&["x", "y"]).unwrap(), [0.5, 0.5]);
        assert!(matches!(p.phrase_embedding::<&str>(&[]), Err(Error::EmptyPhrase)));
    }

    #[test]
    fn disabled_fallback_skips_unknown_words() {
        let p = EmbeddingProvider::parse("x 1 0\n", "v", 0).unwrap().with_fallback(false);
        assert_eq!(p.phrase_embedding(&["x", "zzz"]).unwrap(), [1.0, 0.0]);
        assert!(matches!(p.phrase_embedding(&["zzz"]), Err(Error::NoVector(_))));
    }

    #[test]
    fn cosine_values() {
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
        assert!(matches!(cosine(&[1.0], &[1.0, 0.0]), Err(Error::Dimension { .. })));
    }
}

//! Embedding providers and the cosine-derived similarity `vscore`.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::text;
use crate::{Error, Result};

pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Copy scaled to unit length.
    pub fn normalized(&self) -> Result<Embedding> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(Embedding::new(self.values.iter().map(|v| v / norm).collect()))
    }
}

/// Maps text to fixed-length vectors. Implementations must be deterministic.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// Embeds text that is already known to be non-blank.
    fn embed_text(&self, text: &str) -> Result<Embedding>;
}

/// Embeds `text` with `provider`, rejecting blank input.
pub fn embed(provider: &dyn EmbeddingProvider, text: &str) -> Result<Embedding> {
    if text.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let emb = provider.embed_text(text)?;
    if emb.dim() != provider.dim() {
        return Err(Error::DimensionMismatch {
            left: emb.dim(),
            right: provider.dim(),
        });
    }
    Ok(emb)
}

/// Offline provider: signed feature hashing of content tokens, L2-normalized.
///
/// Stop words are skipped unless nothing else is left, and text without any
/// alphanumeric token hashes as a single token, so every non-blank input has
/// a non-zero vector.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dim must be >= 1".into()));
        }
        Ok(Self { dim })
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM }
    }
}

/// Bucket and sign for one token.
pub(crate) fn token_slot(token: &str, dim: usize) -> (usize, f64) {
    let digest = Sha256::digest(token.as_bytes());
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    let h = u64::from_le_bytes(word);
    let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
    ((h % dim as u64) as usize, sign)
}

impl EmbeddingProvider for HashingEmbedder {
    fn name(&self) -> &str {
        "hashing"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, input: &str) -> Result<Embedding> {
        let mut tokens = text::content_tokens(input);
        if tokens.is_empty() {
            tokens = text::tokenize(input);
        }
        if tokens.is_empty() {
            tokens.push(input.trim().to_string());
        }
        let mut values = vec![0.0; self.dim];
        for token in &tokens {
            let (slot, sign) = token_slot(token, self.dim);
            values[slot] += sign;
        }
        // Colliding tokens of opposite sign can cancel out.
        if values.iter().all(|v| *v == 0.0) {
            let (slot, _) = token_slot(input.trim(), self.dim);
            values[slot] = 1.0;
        }
        Embedding::new(values).normalized()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    dim: usize,
    values: Vec<f64>,
}

/// Wraps a provider with a JSONL cache keyed by (provider name, text hash).
///
/// Lookups are served from memory; new entries are appended to the file under
/// a lock so concurrent callers never interleave records.
pub struct CachedProvider<P> {
    inner: P,
    path: PathBuf,
    memory: Mutex<HashMap<String, Embedding>>,
    writer: Mutex<BufWriter<File>>,
}

impl<P: EmbeddingProvider> CachedProvider<P> {
    pub fn open(inner: P, path: &Path) -> Result<Self> {
        let mut memory = HashMap::new();
        if path.exists() {
            let raw = fs::read_to_string(path)
                .map_err(|e| Error::io(format!("reading cache {}", path.display()), e))?;
            for (idx, line) in raw.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheRecord =
                    serde_json::from_str(line).map_err(|e| Error::Malformed {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        message: e.to_string(),
                    })?;
                if rec.dim == inner.dim() && rec.values.len() == rec.dim {
                    memory.insert(rec.key, Embedding::new(rec.values));
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(format!("opening cache {}", path.display()), e))?;
        Ok(Self {
            inner,
            path: path.to_path_buf(),
            memory: Mutex::new(memory),
            writer: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn cache_key(&self, text: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.inner.name().as_bytes());
        hasher.update([0u8]);
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn len(&self) -> usize {
        self.memory.lock().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedProvider<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed_text(&self, text: &str) -> Result<Embedding> {
        let key = self.cache_key(text);
        if let Some(hit) = self.memory.lock().expect("cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let emb = self.inner.embed_text(text)?;
        let record = CacheRecord {
            key: key.clone(),
            dim: emb.dim(),
            values: emb.values().to_vec(),
        };
        {
            let mut writer = self.writer.lock().expect("cache poisoned");
            let line = serde_json::to_string(&record)?;
            writeln!(writer, "{line}")
                .and_then(|_| writer.flush())
                .map_err(|e| Error::io(format!("writing cache {}", self.path.display()), e))?;
        }
        self.memory
            .lock()
            .expect("cache poisoned")
            .insert(key, emb.clone());
        Ok(emb)
    }
}

/// Standard cosine similarity.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// `1 / (2 - cos(a, b))`, in `[1/3, 1]`.
pub fn vscore(a: &Embedding, b: &Embedding) -> Result<f64> {
    Ok(vscore_from_cosine(cosine(a, b)?))
}

#[inline]
pub fn vscore_from_cosine(cos: f64) -> f64 {
    1.0 / (2.0 - cos.clamp(-1.0, 1.0))
}

/// vscore for two unit vectors of equal length; skips validation.
#[inline]
pub(crate) fn vscore_unit(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    vscore_from_cosine(dot)
}

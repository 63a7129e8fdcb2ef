use std::collections::BTreeSet;

use crate::{Error, Result};

/// `|golden ∩ retrieved[..k]| / |golden|`.
pub fn recall(golden: &BTreeSet<String>, retrieved: &[String], k: usize) -> Result<f64> {
    if golden.is_empty() {
        return Err(Error::EmptyGolden);
    }
    let top: BTreeSet<&String> = retrieved.iter().take(k).collect();
    let hits = golden.iter().filter(|g| top.contains(g)).count();
    Ok(hits as f64 / golden.len() as f64)
}

/// 1 when any golden document is among the first `n` retrieved, else 0.
pub fn hit_at_n(golden: &BTreeSet<String>, retrieved: &[String], n: usize) -> Result<u8> {
    if golden.is_empty() {
        return Err(Error::EmptyGolden);
    }
    Ok(u8::from(retrieved.iter().take(n).any(|d| golden.contains(d))))
}

/// `|old ∩ new| / |old|`: how much of an earlier retrieval is retrieved again.
pub fn doc_set_similarity(old: &BTreeSet<String>, new: &BTreeSet<String>) -> Result<f64> {
    if old.is_empty() {
        return Err(Error::EmptyReference);
    }
    Ok(old.intersection(new).count() as f64 / old.len() as f64)
}

/// Evaluation record of one retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub query: String,
    pub golden: BTreeSet<String>,
    pub retrieved: Vec<String>,
    pub config_name: String,
}

impl EvalRecord {
    pub fn recall(&self, k: usize) -> Result<f64> {
        recall(&self.golden, &self.retrieved, k)
    }

    pub fn hit_at_n(&self, n: usize) -> Result<u8> {
        hit_at_n(&self.golden, &self.retrieved, n)
    }
}

//! Seeded synthetic corpora and benchmark queries.
//!
//! Documents are grouped into topics. Every sentence mixes words from a large
//! shared vocabulary, the document's topic vocabulary, and a small vocabulary
//! unique to the document. Queries built from a chunk's words are therefore
//! often ambiguous between documents of one topic, which is what makes
//! first-stage retrieval imperfect and feedback worth having.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Chunk, Document};
use crate::indicators::SyntheticQueryProvider;
use crate::text;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthCorpusConfig {
    pub seed: u64,
    pub documents: usize,
    pub topics: usize,
    pub common_vocab: usize,
    pub topic_vocab: usize,
    pub doc_vocab: usize,
    pub paragraphs: (usize, usize),
    pub sentences: (usize, usize),
    pub words: (usize, usize),
    /// Probability that a word is drawn from the topic vocabulary.
    pub topic_share: f64,
    /// Probability that a word is drawn from the document vocabulary.
    pub doc_share: f64,
}

impl Default for SynthCorpusConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            documents: 100,
            topics: 5,
            common_vocab: 150,
            topic_vocab: 40,
            doc_vocab: 12,
            paragraphs: (4, 6),
            sentences: (4, 6),
            words: (8, 14),
            topic_share: 0.5,
            doc_share: 0.06,
        }
    }
}

const ONSETS: [&str; 22] = [
    "b", "c", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "cr", "dr",
    "gl", "pl", "st", "tr",
];
const VOWELS: [&str; 7] = ["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: [&str; 5] = ["", "n", "r", "s", "x"];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS[rng.gen_range(0..ONSETS.len())]);
        w.push_str(VOWELS[rng.gen_range(0..VOWELS.len())]);
    }
    w.push_str(CODAS[rng.gen_range(0..CODAS.len())]);
    w
}

fn vocabulary(rng: &mut ChaCha8Rng, size: usize, taken: &mut HashSet<String>) -> Vec<String> {
    let mut words = Vec::with_capacity(size);
    while words.len() < size {
        let w = pseudo_word(rng);
        if !text::is_stop_word(&w) && taken.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

/// Generates `config.documents` documents, deterministically from the seed.
pub fn generate_corpus(config: &SynthCorpusConfig) -> Result<Vec<Document>> {
    if config.documents == 0 || config.topics == 0 || config.doc_vocab < 2 {
        return Err(Error::InvalidConfig(
            "synthetic corpus needs documents, topics and >= 2 document words".into(),
        ));
    }
    if config.topic_share + config.doc_share > 1.0 {
        return Err(Error::InvalidConfig("topic_share + doc_share must be <= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut taken = HashSet::new();
    let common = vocabulary(&mut rng, config.common_vocab.max(1), &mut taken);
    let topics: Vec<Vec<String>> = (0..config.topics)
        .map(|_| vocabulary(&mut rng, config.topic_vocab.max(1), &mut taken))
        .collect();

    let mut docs = Vec::with_capacity(config.documents);
    for d in 0..config.documents {
        let topic = &topics[d % config.topics];
        let own = vocabulary(&mut rng, config.doc_vocab, &mut taken);
        let title = format!("{} {} {}", capitalize(&topic[0]), own[0], own[1]);
        let n_paras = rng.gen_range(config.paragraphs.0..=config.paragraphs.1);
        let mut paragraphs = Vec::with_capacity(n_paras);
        for _ in 0..n_paras {
            let n_sent = rng.gen_range(config.sentences.0..=config.sentences.1);
            let mut sentences = Vec::with_capacity(n_sent);
            for _ in 0..n_sent {
                let n_words = rng.gen_range(config.words.0..=config.words.1);
                let words: Vec<&str> = (0..n_words)
                    .map(|_| {
                        let r: f64 = rng.gen();
                        let vocab = if r < config.topic_share {
                            topic
                        } else if r < config.topic_share + config.doc_share {
                            &own
                        } else {
                            &common
                        };
                        vocab[rng.gen_range(0..vocab.len())].as_str()
                    })
                    .collect();
                sentences.push(format!("{}.", capitalize(&words.join(" "))));
            }
            paragraphs.push(sentences.join(" "));
        }
        docs.push(Document {
            doc_id: format!("doc-{d:03}"),
            title,
            body: paragraphs.join("\n\n"),
            version: 1,
        });
    }
    Ok(docs)
}

fn chunk_seed(seed: u64, chunk_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(chunk_id.as_bytes());
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(word)
}

/// Query generator for held-out benchmark queries: a few distinct words of the
/// chunk sampled uniformly, wrapped in a question template. Seeded per chunk,
/// so it is independent of the chunk's position in the corpus.
#[derive(Debug, Clone)]
pub struct SampledQueryProvider {
    seed: u64,
    queries_per_chunk: usize,
    words_per_query: usize,
}

impl SampledQueryProvider {
    const TEMPLATES: [&'static str; 4] = ["how do i {}", "what is the {}", "why is {}", "{}"];

    pub fn new(seed: u64, queries_per_chunk: usize, words_per_query: usize) -> Result<Self> {
        if queries_per_chunk == 0 || words_per_query == 0 {
            return Err(Error::InvalidConfig(
                "queries_per_chunk and words_per_query must be >= 1".into(),
            ));
        }
        Ok(Self {
            seed,
            queries_per_chunk,
            words_per_query,
        })
    }
}

impl SyntheticQueryProvider for SampledQueryProvider {
    fn queries_per_chunk(&self) -> usize {
        self.queries_per_chunk
    }

    fn generate(&self, chunk: &Chunk) -> Result<Vec<String>> {
        let words = text::unique_content_tokens(&chunk.content);
        if words.is_empty() {
            return Err(Error::Provider(format!("chunk {} has no words", chunk.chunk_id)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(chunk_seed(self.seed, &chunk.chunk_id));
        let take = self.words_per_query.min(words.len());
        Ok((0..self.queries_per_chunk)
            .map(|_| {
                let picked: Vec<&str> = words
                    .choose_multiple(&mut rng, take)
                    .map(String::as_str)
                    .collect();
                let template = Self::TEMPLATES[rng.gen_range(0..Self::TEMPLATES.len())];
                template.replace("{}", &picked.join(" "))
            })
            .collect())
    }
}

/// A labelled benchmark query: the source document is the golden target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchQuery {
    pub text: String,
    pub chunk_id: String,
    pub golden: String,
}

impl BenchQuery {
    pub fn golden_set(&self) -> BTreeSet<String> {
        BTreeSet::from([self.golden.clone()])
    }
}

/// Queries for every chunk, shuffled with `seed`. Queries with the same set of
/// content words are kept only once, so no two pool entries are the same
/// question with different golden documents.
pub fn query_pool(
    chunks: &[Chunk],
    provider: &dyn SyntheticQueryProvider,
    seed: u64,
) -> Result<Vec<BenchQuery>> {
    let mut seen = HashSet::new();
    let mut pool = Vec::new();
    for chunk in chunks {
        for text in provider.generate(chunk)? {
            let mut key = text::unique_content_tokens(&text);
            key.sort();
            if seen.insert(key) {
                pool.push(BenchQuery {
                    text,
                    chunk_id: chunk.chunk_id.clone(),
                    golden: chunk.doc_id.clone(),
                });
            }
        }
    }
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(pool)
}
